"""Strong- and weak-driving effective generators."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

import numpy as np
from scipy.optimize import brentq

from .algebra import (DEFAULT_POLICY, NumericPolicy, commutator_super, kron_sum_power,
                      check_cap)
from .model import ChainSpec, SystemSpec, chain_system


@dataclass
class EffectiveLiouvillean:
    """Effective generator on a reduced subspace.

    ``basis`` holds the reduced basis as columns of the original space when
    one exists; ``g`` carries the Gaudin couplings for chain models.
    """

    matrix: np.ndarray
    projector_dim: int
    order: int
    sigma: float
    basis: np.ndarray | None = None
    g: np.ndarray | None = None
    labels: list | None = None

    def eigenvalues(self) -> np.ndarray:
        if np.allclose(self.matrix, self.matrix.conj().T, atol=1e-12):
            return np.linalg.eigvalsh(self.matrix).astype(complex)
        return np.linalg.eigvals(self.matrix)


def strong_effective(sys: SystemSpec, q: int = 1, policy: NumericPolicy | None = None,
                     pinv_tol: float = 1e-10) -> EffectiveLiouvillean:
    """Schur-complement generator ``-i H_PP - (1/σ) H_PQ D_QQ^{-1} H_QP``.

    ``P`` is the kernel of ``D = ½ (V̊^{⊕q})²`` and ``H`` here is the
    commutator superoperator of ``H^{⊕q}``.
    """
    policy = policy or DEFAULT_POLICY
    check_cap(sys.dim ** (2 * q), policy, "Liouvillean")
    Hs = commutator_super(kron_sum_power(sys.H, q))
    Vs = commutator_super(kron_sum_power(sys.V, q))
    if sys.sigma < 10 * np.linalg.norm(sys.H, 2):
        warnings.warn("strong_effective used with sigma < 10 ||H||", stacklevel=2)
    D = 0.5 * Vs @ Vs
    w, U = np.linalg.eigh((D + D.conj().T) / 2)
    scale = max(np.abs(w).max(), 1.0)
    zero = np.abs(w) <= 1e-9 * scale
    P, Q = U[:, zero], U[:, ~zero]
    Hpp = P.conj().T @ Hs @ P
    if Q.shape[1] == 0:
        return EffectiveLiouvillean(-1j * Hpp, P.shape[1], 1, sys.sigma, P)
    wq = w[~zero]
    if np.abs(wq).min() <= pinv_tol * scale:
        raise np.linalg.LinAlgError("D_QQ singular")
    Hpq = P.conj().T @ Hs @ Q
    Hqp = Q.conj().T @ Hs @ P
    M = -1j * Hpp - (1.0 / sys.sigma) * Hpq @ (Hqp / wq[:, None])
    return EffectiveLiouvillean(M, P.shape[1], 1, sys.sigma, P)


# Fock-space machinery for the chain ----------------------------------------

def gaudin_couplings(L: int) -> np.ndarray:
    """``g_k = (2/L) sin²(πk/L)`` for ``k = 1..L-1``."""
    k = np.arange(1, L)
    return 2.0 / L * np.sin(np.pi * k / L) ** 2


def chain_modes(L: int) -> np.ndarray:
    """Orthonormal eigenmodes of the hopping on sites ``2..L`` (columns,
    in the site basis of the full chain)."""
    j = np.arange(1, L)
    U = np.zeros((L, L - 1))
    for k in range(1, L):
        U[1:, k - 1] = math.sqrt(2.0 / L) * np.sin(np.pi * j * k / L)
    return U


def fock_basis(n_modes: int, n_part: int, statistics: str) -> list[tuple[int, ...]]:
    """Occupation tuples of ``n_part`` particles; ``statistics`` is
    ``"boson"`` or ``"fermion"``."""
    out = []
    if statistics == "boson":
        for c in combinations_with_replacement(range(n_modes), n_part):
            occ = [0] * n_modes
            for m in c:
                occ[m] += 1
            out.append(tuple(occ))
    elif statistics == "fermion":
        for c in combinations(range(n_modes), n_part):
            occ = [0] * n_modes
            for m in c:
                occ[m] = 1
            out.append(tuple(occ))
    else:
        raise ValueError(statistics)
    return sorted(out, reverse=True)


def second_quantize(X: np.ndarray, basis, statistics: str) -> np.ndarray:
    """Matrix of ``Σ X_ab a†_a a_b`` on the given Fock basis."""
    index = {b: i for i, b in enumerate(basis)}
    n = len(basis)
    out = np.zeros((n, n), dtype=complex)
    nz = np.argwhere(np.abs(X) > 0)
    for col, occ in enumerate(basis):
        for a, b in nz:
            if occ[b] == 0:
                continue
            new = list(occ)
            amp = math.sqrt(new[b]) if statistics == "boson" else 1.0
            new[b] -= 1
            if statistics == "fermion":
                if new[a] == 1:
                    continue
                sgn = (-1) ** (sum(new[:b]) + sum(new[:a]))
                amp *= sgn
            else:
                amp *= math.sqrt(new[a] + 1)
            new[a] += 1
            out[index[tuple(new)], col] += X[a, b] * amp
    return out


SECTORS = ("symmetric", "antisymmetric", "full")


def _copy_operator(X: np.ndarray, q: int, sector: str):
    if sector == "full":
        return kron_sum_power(X, q)
    stat = "boson" if sector == "symmetric" else "fermion"
    basis = fock_basis(X.shape[0], q, stat)
    return second_quantize(X, basis, stat)


def _site_one_count(L: int, q: int, sector: str) -> np.ndarray:
    """Occupation of mode 0 (the driven site) on each copy-space basis state."""
    if sector == "full":
        idx = np.indices((L,) * q).reshape(q, -1)
        return np.sum(idx == 0, axis=0)
    stat = "boson" if sector == "symmetric" else "fermion"
    return np.array([b[0] for b in fock_basis(L, q, stat)])


def strong_chain_rwa(L: int, q: int = 1, sigma: float = 1.0,
                     sector: str = "symmetric") -> EffectiveLiouvillean:
    """Hermitian strong-driving generator of the chain after the RWA.

    The single-particle basis is the driven site (mode 0) followed by the
    eigenmodes of the undriven sites.  With ``W_k = |k><0|`` the generator is
    ``-(2/σ) Σ_k g_k (W̊_k W̊_k^† + W̊_k^† W̊_k)`` restricted to states with equal
    ket and bra occupation of mode 0.  ``sector`` selects fully symmetric
    (bosonic), fully antisymmetric (fermionic) or all copy operators.
    """
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}")
    if L < 2:
        raise ValueError("L must be >= 2")
    g = gaudin_couplings(L)
    n1 = _site_one_count(L, q, sector)
    keep = np.flatnonzero((n1[:, None] == n1[None, :]).reshape(-1))
    check_cap(keep.size, None, "RWA sector")
    M = np.zeros((keep.size, keep.size), dtype=complex)
    for k in range(1, L):
        W = np.zeros((L, L))
        W[k, 0] = 1.0
        # W̊ leaves the kept sector, so restrict only the products
        C = commutator_super(_copy_operator(W, q, sector))
        prod = (C @ C.conj().T + C.conj().T @ C)[np.ix_(keep, keep)]
        M -= (2.0 / sigma) * g[k - 1] * prod
    M = (M + M.conj().T) / 2
    return EffectiveLiouvillean(M, keep.size, 1, sigma, None, g)


def strong_chain_rwa_spectrum(L: int, q: int, sigma: float, sector: str) -> np.ndarray:
    return np.sort(np.linalg.eigvalsh(strong_chain_rwa(L, q, sigma, sector).matrix))


# weak driving ----------------------------------------------------------------

@dataclass
class RWABlocks:
    """Resonance classes of index pairs with their dissipator blocks.

    Generator eigenvalues in block ``b`` are ``-i ω_b - (σ/2) eig(R_b)``.
    """

    frequencies: np.ndarray
    blocks: list
    sigma: float
    energies: np.ndarray
    flags: list = field(default_factory=list)

    def generator_eigenvalues(self) -> np.ndarray:
        out = []
        for om, (idx, R) in zip(self.frequencies, self.blocks):
            out.extend(-1j * om - 0.5 * self.sigma * np.linalg.eigvalsh(R))
        return np.array(out)

    def validity_time(self) -> float:
        """Inverse of the smallest non-zero spacing between distinct classes."""
        f = np.sort(self.frequencies)
        gaps = np.diff(f)
        gaps = gaps[gaps > 0]
        return float(1.0 / gaps.min()) if gaps.size else float("inf")


def weak_rwa(sys: SystemSpec, res_tol: float | None = None) -> RWABlocks:
    """Group pairs ``(i, j)`` of ``H`` eigenstates by Bohr frequency and build
    the matrix of ``ρ -> [V, [V, ρ]]`` inside each class."""
    V = sys.V
    if np.abs(V.imag).max(initial=0) > 1e-12:
        warnings.warn("weak_rwa assumes a real V", stacklevel=2)
    E, U = np.linalg.eigh(sys.H)
    d = sys.dim
    hnorm = max(np.abs(E).max(), 1e-300)
    res_tol = 1e-8 * hnorm if res_tol is None else res_tol
    Vt = U.conj().T @ V @ U
    V2 = Vt @ Vt
    pairs = [(i, j) for i in range(d) for j in range(d)]
    om = np.array([E[i] - E[j] for i, j in pairs])
    order = np.argsort(om, kind="stable")
    classes: list[list[int]] = []
    for p in order:
        if classes and abs(om[p] - om[classes[-1][0]]) <= res_tol:
            classes[-1].append(p)
        else:
            classes.append([p])
    flags = []
    if np.any(np.abs(np.diff(np.sort(E))) <= res_tol):
        flags.append("degenerate H spectrum")
    blocks, freqs = [], []
    for cl in classes:
        cl = sorted(cl)
        R = np.zeros((len(cl), len(cl)), dtype=complex)
        for a, pa in enumerate(cl):
            i, j = pairs[pa]
            for b, pb in enumerate(cl):
                k, l = pairs[pb]
                R[a, b] = (V2[i, k] * (l == j) + (i == k) * V2[l, j]
                           - 2 * Vt[i, k] * Vt[l, j])
        blocks.append((np.array(cl), (R + R.conj().T) / 2))
        freqs.append(float(np.mean(om[cl])))
    return RWABlocks(np.array(freqs), blocks, sys.sigma, E, flags)


def weak_gap_formula(L: int, sigma: float) -> float:
    """Leading-order closed form ``2σπ/L³``."""
    return 2 * sigma * math.pi / L**3


def chain_weak_gap_exact(L: int, sigma: float) -> float:
    """RWA gap of the chain driven at site 1, from the two-dimensional
    resonant block pairing ``(i, j)`` with ``(L+1-j, L+1-i)``."""
    s2 = math.sin(math.pi / (L + 1)) ** 2
    return 2 * sigma / (L + 1) * (s2 - 2.0 / (L + 1) * s2**2)


def diagonal_secular_roots(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Eigenvalues of ``2 diag(a) - 2 a aᵀ`` (with ``Σ a = 1``) from the
    secular equation ``1 = 2 Σ a_i² / (2 a_i - r)``.

    Coincident poles are merged; each merged pole of multiplicity ``m``
    also contributes ``m - 1`` eigenvalues located exactly on the pole.
    """
    a = np.asarray(a, dtype=float)
    distinct, weights, mult = [], [], []
    for ai in np.sort(a):
        p = 2 * ai
        if distinct and abs(p - distinct[-1]) <= tol * max(1.0, abs(p)):
            weights[-1] += ai**2
            mult[-1] += 1
        else:
            distinct.append(p)
            weights.append(ai**2)
            mult.append(1)
    distinct = np.array(distinct)
    weights = np.array(weights)

    def f(r):
        return 1 - 2 * np.sum(weights / (distinct - r))

    roots = [0.0] if abs(f(0.0)) < 1e-9 else []
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        eps = 1e-14 * max(1.0, hi)
        roots.append(brentq(f, lo + eps, hi - eps, xtol=1e-15, rtol=1e-15, maxiter=500))
    for p, m in zip(distinct, mult):
        roots.extend([float(p)] * (m - 1))
    return np.sort(np.array(roots))


def weak_gap(target, sigma: float | None = None) -> float:
    """Smallest non-zero dissipation rate of the weak-driving RWA generator.

    ``target`` is a :class:`SystemSpec` or a :class:`ChainSpec`.
    """
    if isinstance(target, ChainSpec):
        sys = chain_system(target, 1.0 if sigma is None else sigma)
    else:
        sys = target if sigma is None else target.with_sigma(sigma)
    if sys.sigma > 0.1 * np.linalg.norm(sys.H, 2):
        warnings.warn("weak_gap used outside the weak-driving regime", stacklevel=2)
    blocks = weak_rwa(sys)
    rates = np.concatenate([0.5 * sys.sigma * np.linalg.eigvalsh(R) for _, R in blocks.blocks])
    scale = 0.5 * sys.sigma * max(np.abs(rates).max() / max(0.5 * sys.sigma, 1e-300), 1.0)
    nz = rates[rates > 1e-9 * scale]
    return float(nz.min())
