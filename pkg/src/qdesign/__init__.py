"""Convergence of stochastically driven quantum systems to unitary designs."""
from .algebra import NumericPolicy, DEFAULT_POLICY
from .model import SystemSpec, ChainSpec, chain_system, counterexample_system
from .liouville import build_liouvillean

__version__ = "0.1.0"

__all__ = ["NumericPolicy", "DEFAULT_POLICY", "SystemSpec", "ChainSpec", "chain_system",
           "counterexample_system", "build_liouvillean", "__version__"]
