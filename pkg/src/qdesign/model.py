"""Driven systems, the quantum-walk chain and controllability diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from functools import reduce

import numpy as np

from .algebra import (DEFAULT_POLICY, NumericPolicy, DenseCapError, as_matrix,
                      commutator_super, kron_sum_power, null_space, check_cap)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class SystemSpec:
    """Hamiltonian ``H``, control coupling ``V`` and noise strength ``sigma``."""

    H: np.ndarray
    V: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        H = as_matrix(self.H, hermitian=True, name="H")
        V = as_matrix(self.V, hermitian=True, name="V")
        if H.shape != V.shape:
            raise ValueError("H and V must have the same shape")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and >= 0")
        H.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def with_sigma(self, sigma: float) -> "SystemSpec":
        return SystemSpec(self.H, self.V, sigma)


@dataclass(frozen=True)
class ChainSpec:
    """Open chain of ``L`` sites with the noisy control acting on site ``c``."""

    L: int
    c: int = 1

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if not 1 <= self.c <= self.L:
            raise ValueError("c must satisfy 1 <= c <= L")


def chain_hamiltonian(L: int) -> np.ndarray:
    H = np.diag(np.ones(L - 1), 1)
    return (H + H.T).astype(complex)


def chain_system(spec: ChainSpec | int, sigma: float = 0.0) -> SystemSpec:
    if not isinstance(spec, ChainSpec):
        spec = ChainSpec(int(spec))
    V = np.zeros((spec.L, spec.L), dtype=complex)
    V[spec.c - 1, spec.c - 1] = 1.0
    return SystemSpec(chain_hamiltonian(spec.L), V, sigma)


def is_coprime_controllable(spec: ChainSpec) -> bool:
    return gcd(spec.c, spec.L + 1) == 1


def pauli_string(s: str) -> np.ndarray:
    """Tensor product of Pauli letters, e.g. ``"XZ"`` -> σx ⊗ σz."""
    return reduce(np.kron, [PAULI[ch] for ch in s.upper()])


def pauli_sum(terms) -> np.ndarray:
    """Sum of ``(coefficient, "XYZ..")`` terms."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty Pauli sum")
    n = len(terms[0][1])
    out = np.zeros((2**n, 2**n), dtype=complex)
    for coef, s in terms:
        if len(s) != n:
            raise ValueError("Pauli strings must have equal length")
        out += complex(coef) * pauli_string(s)
    return out


def counterexample_system(eps: float, sigma: float) -> SystemSpec:
    """Two spins whose single-copy dynamics mixes but whose two-copy does not
    (at ``eps = 0``): an antiunitary-type symmetry survives control."""
    H = pauli_sum([(1, "XX"), (1, "YY"), (1, "XI"), (eps, "ZZ")])
    V = pauli_string("YI")
    return SystemSpec(H, V, sigma)


def _traceless_herm_basis_vec(X: np.ndarray) -> np.ndarray:
    # real coordinates of an anti-Hermitian traceless matrix
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def lie_algebra_dimension(sys: SystemSpec, tol: float = 1e-9,
                          policy: NumericPolicy | None = None) -> int:
    """Real dimension of the Lie algebra generated by ``iH`` and ``iV``
    (traceless parts)."""
    policy = policy or DEFAULT_POLICY
    d = sys.dim
    if d > policy.lie_cap:
        raise DenseCapError(f"d={d} exceeds Lie-closure cap {policy.lie_cap}")
    basis: list[np.ndarray] = []  # orthonormal real vectors
    mats: list[np.ndarray] = []

    def add(X) -> bool:
        X = X - np.trace(X) / d * np.eye(d)
        v = _traceless_herm_basis_vec(X)
        for b in basis:
            v = v - (b @ v) * b
        for b in basis:  # second pass for stability
            v = v - (b @ v) * b
        nv = np.linalg.norm(v)
        if nv <= tol * max(1.0, np.linalg.norm(X)):
            return False
        v = v / nv
        basis.append(v)
        mats.append((v[: d * d] + 1j * v[d * d:]).reshape(d, d))
        return True

    for G in (1j * sys.H, 1j * sys.V):
        add(G)
    frontier = list(range(len(mats)))
    it = 0
    max_it = d**4
    while frontier and it < max_it:
        new = []
        for i in frontier:
            for j in range(len(mats)):
                if i == j:
                    continue
                A, B = mats[i], mats[j]
                if add(A @ B - B @ A):
                    new.append(len(mats) - 1)
                if len(basis) == d * d - 1:
                    return d * d - 1
            it += 1
        frontier = new
    return len(basis)


def commutant_dimension(sys: SystemSpec, q: int,
                        policy: NumericPolicy | None = None) -> int:
    """Dimension of the joint commutant of ``H^{⊕q}`` and ``V^{⊕q}``."""
    n = sys.dim**q
    check_cap(n * n, policy, "commutant problem")
    A = np.vstack([commutator_super(kron_sum_power(sys.H, q, policy)),
                   commutator_super(kron_sum_power(sys.V, q, policy))])
    return null_space(A).shape[1]


def symmetry_obstruction(sys: SystemSpec, tol: float | None = None) -> list[np.ndarray]:
    """Orthonormal basis of solutions ``Q`` of ``Q Hᵀ + H Q = 0`` and
    ``Q Vᵀ + V Q = 0``.

    With row-major vectorization ``vec(HQ + QHᵀ) = (H⊗I + I⊗H) vec(Q)``.
    An empty list is a necessary condition for controllability at q = 2.
    """
    d = sys.dim
    eye = np.eye(d)
    A = np.vstack([np.kron(sys.H, eye) + np.kron(eye, sys.H),
                   np.kron(sys.V, eye) + np.kron(eye, sys.V)])
    ns = null_space(A, tol)
    return [ns[:, k].reshape(d, d) for k in range(ns.shape[1])]
