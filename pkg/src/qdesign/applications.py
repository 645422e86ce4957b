"""Consumers of the expander distance: permanents, Wick contractions and
control-time estimates."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .liouville import all_permutations
from .spectral import chain_gap


def permanent(M) -> complex:
    """Ryser's formula with Gray-code updates, ``O(2^q q)``."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("permanent needs a square matrix")
    q = M.shape[0]
    if q > 20:
        raise ValueError("permanent limited to q <= 20")
    if q == 0:
        return 1.0 + 0j
    row = np.zeros(q, dtype=complex)
    total = 0j
    prev = 0
    for k in range(1, 2 ** q):
        gray = k ^ (k >> 1)
        j = (gray ^ prev).bit_length() - 1
        row += M[:, j] if gray & (1 << j) else -M[:, j]
        prev = gray
        total += (-1) ** bin(gray).count("1") * np.prod(row)
    return complex((-1) ** q * total)


def permanent_naive(M) -> complex:
    """Sum over all ``q!`` permutations (reference oracle)."""
    M = np.asarray(M, dtype=complex)
    q = M.shape[0]
    return complex(sum(np.prod(M[np.arange(q), list(p)]) for p in itertools.permutations(range(q))))


def moment_error_bound(e_value: float, K_norm_1: float) -> float:
    """Bound ``e · ‖K‖₁`` on ``|Tr[(E U^{⊗q,q} - Haar) K]|``."""
    if e_value < 0:
        raise ValueError("e_value must be non-negative")
    if K_norm_1 < 0:
        raise ValueError("K_norm_1 must be non-negative")
    return float(e_value) * float(K_norm_1)


def _wick(M: np.ndarray, statistics: str) -> complex:
    if statistics == "fermion":
        return complex(np.linalg.det(M)) if M.size else 1.0 + 0j
    return permanent(M)


@dataclass
class ContractionSpec:
    """Index data of a contraction operator ``K`` with ``Tr[U^{⊗q,q} K]``.

    ``boson_sampling``
        ``rows`` are output modes, ``cols`` input modes (repeats allowed
        for multiple occupation); the value is ``|per U[rows, cols]|²``.
    ``multipoint``
        ``rows = (i_1..i_q)`` and ``cols = (j_1..j_q)`` select
        ``<a†_{j_1}..a†_{j_q} a_{i_q}..a_{i_1}>`` for a quasi-free initial
        state with one-body matrix ``gamma[k, l] = <a†_l a_k>``.
    ``xy``
        ``<S^α_i S^β_{i+q}>`` for ``sites = (i, α, β)`` in the Jordan-Wigner
        picture, with ``gamma`` as above for the fermions.
    """

    q: int
    kind: str
    rows: tuple = ()
    cols: tuple = ()
    gamma: np.ndarray | None = None
    statistics: str = "boson"
    sites: tuple = ()
    _norm: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("boson_sampling", "multipoint", "xy"):
            raise ValueError(f"unknown contraction kind {self.kind!r}")
        if self.statistics not in ("boson", "fermion"):
            raise ValueError("statistics must be 'boson' or 'fermion'")
        if self.kind != "xy" and (len(self.rows) != self.q or len(self.cols) != self.q):
            raise ValueError("rows and cols must have q entries")
        if self.kind == "xy":
            i, a, b = self.sites
            if a not in "xy" or b not in "xy":
                raise ValueError("xy correlators use alpha, beta in {'x','y'}")

    def validate(self, d: int):
        idx = list(self.rows) + list(self.cols)
        if self.kind == "xy":
            idx = [self.sites[0], self.sites[0] + self.q]
        if any(not 0 <= i < d for i in idx):
            raise ValueError("index outside the matrix dimension")
        if self.kind != "boson_sampling":
            if self.gamma is None or np.shape(self.gamma) != (d, d):
                raise ValueError("a d x d initial two-point matrix is required")

    def operator(self, d: int) -> np.ndarray:
        """Dense ``K`` on the ``d^{2q}``-dimensional space (small cases)."""
        self.validate(d)
        if self.kind == "xy":
            raise NotImplementedError("xy correlators are evaluated from the evolved two-point matrix")
        q = self.q
        n = d ** q
        K = np.zeros((n * n, n * n), dtype=complex)

        def flat(ix):
            return int(np.ravel_multi_index(tuple(ix), (d,) * q)) if q else 0

        if self.kind == "boson_sampling":
            # entries of X = U^{⊗q} ⊗ conj(U^{⊗q}): X[(a,b),(c,e)]; Tr[X K] = Σ X[r,s] K[s,r]
            r = flat(self.rows) * n + flat(self.rows)
            for s1 in all_permutations(q):
                c = flat([self.cols[s1[i]] for i in range(q)])
                for s2 in all_permutations(q):
                    e = flat([self.cols[s2[i]] for i in range(q)])
                    K[c * n + e, r] += 1.0
            return K
        G = np.asarray(self.gamma, dtype=complex)
        r = flat(self.rows) * n + flat(self.cols)
        for k in itertools.product(range(d), repeat=q):
            for l in itertools.product(range(d), repeat=q):
                K[flat(k) * n + flat(l), r] = _wick(G[np.ix_(k, l)], self.statistics)
        return K

    def trace_norm(self, d: int) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.svd(self.operator(d), compute_uv=False).sum())
        return self._norm


def _pfaffian(A: np.ndarray) -> complex:
    """Pfaffian of a complex antisymmetric matrix by pivoted elimination."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if n % 2:
        return 0j
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        p = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if p != k + 1:
            A[[k + 1, p]] = A[[p, k + 1]]
            A[:, [k + 1, p]] = A[:, [p, k + 1]]
            pf = -pf
        if A[k, k + 1] == 0:
            return 0j
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1]) - np.outer(A[k + 2:, k + 1], tau)
    return pf


def xy_correlator(gamma_t: np.ndarray, i: int, q: int, alpha: str, beta: str) -> complex:
    """``<S^α_i S^β_{i+q}>`` (``S = σ/2``) of a quasi-free, particle-conserving
    fermion state with one-body matrix ``gamma_t[k, l] = <c†_l c_k>``.

    An occupied mode is spin up and ``c_m = S_m σ^-_m``.  With
    ``A = c† + c`` and ``B = c† - c`` the Jordan-Wigner map gives
    ``σ^x_m = S_m A_m`` and ``σ^y_m = -i S_m B_m`` with the string
    ``S_m = Π_{l<m} A_l B_l``, so the correlator is the linear-operator
    product ``X_i (Π_{l=i}^{j-1} A_l B_l) Y_j``, evaluated by Wick's theorem
    as a Pfaffian of pairwise contractions.
    """
    G = np.asarray(gamma_t, dtype=complex)
    d = G.shape[0]
    j = i + q
    if q < 1 or not 0 <= i < j < d:
        raise ValueError("sites outside the chain")
    sgn = {"A": 1, "B": -1}
    first = "A" if alpha == "x" else "B"
    last = "A" if beta == "x" else "B"
    ops = [(first, i)] + [(x, l) for l in range(i, j) for x in "AB"] + [(last, j)]
    coef = (1 if alpha == "x" else -1j) * (1 if beta == "x" else -1j)
    n = len(ops)
    M = np.zeros((n, n), dtype=complex)
    for a in range(n):
        x, m = ops[a]
        for b in range(a + 1, n):
            y, k = ops[b]
            # <(c†_m + s_x c_m)(c†_k + s_y c_k)>
            M[a, b] = sgn[y] * G[k, m] + sgn[x] * ((m == k) - G[m, k])
            M[b, a] = -M[a, b]
    return complex(0.25 * coef * _pfaffian(M))


def multipoint_correlator(U, spec: ContractionSpec) -> complex:
    """``Tr[U^{⊗q,q} K]`` evaluated by contracting the selected indices only."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    spec.validate(d)
    if spec.kind == "boson_sampling":
        return complex(abs(permanent(U[np.ix_(spec.rows, spec.cols)])) ** 2)
    Gt = U @ np.asarray(spec.gamma, dtype=complex) @ U.conj().T
    if spec.kind == "multipoint":
        return _wick(Gt[np.ix_(spec.rows, spec.cols)], spec.statistics)
    i, a, b = spec.sites
    return xy_correlator(Gt, i, spec.q, a, b)


def control_time_estimate(L: int, sigma_grid) -> tuple[float, float]:
    """``min_σ 1/λ*(σ)`` for the chain of length ``L`` and the minimizing σ."""
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    if sigma_grid.size == 0 or np.any(sigma_grid <= 0):
        raise ValueError("sigma grid must be non-empty and positive")
    t = np.array([1.0 / chain_gap(L, s) for s in sigma_grid])
    k = int(np.argmin(t))
    return float(t[k]), float(sigma_grid[k])


CONTROL_TIME_COMPARISON = 0.069  # reference T_c / L^3 from external control runs
