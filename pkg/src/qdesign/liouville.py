"""q-copy Liouvillean, permutation steady states and the Haar projector."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np
import scipy.sparse.linalg as spla

from .algebra import (DEFAULT_POLICY, DenseCapError, NumericPolicy, Spectrum, commutator_super,
                      embed, kron_sum_power, dag)
from .model import SystemSpec


@dataclass
class LiouvilleanQ:
    """Vectorized generator of ``ρ -> -i[H^{⊕q}, ρ] - σ/2 [V^{⊕q}, [V^{⊕q}, ρ]]``.

    ``matrix`` is ``None`` when the dense size exceeds the cap; ``matvec``
    works in both cases.
    """

    sys: SystemSpec
    q: int
    matrix: np.ndarray | None
    Hq: np.ndarray
    Vq: np.ndarray

    @property
    def d(self) -> int:
        return self.sys.dim

    @property
    def dim(self) -> int:
        return self.d ** (2 * self.q)

    @property
    def dense(self) -> bool:
        return self.matrix is not None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        H, V, s = self.Hq, self.Vq, self.sys.sigma
        c = V @ rho - rho @ V
        return -1j * (H @ rho - rho @ H) - 0.5 * s * (V @ c - c @ V)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ x
        n = self.d**self.q
        return self.apply(x.reshape(n, n)).reshape(-1)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        # adjoint generator: +i[H, .] - σ/2 [V, [V, .]]
        if self.matrix is not None:
            return dag(self.matrix) @ x
        n = self.d**self.q
        rho = x.reshape(n, n)
        H, V, s = self.Hq, self.Vq, self.sys.sigma
        c = V @ rho - rho @ V
        return (1j * (H @ rho - rho @ H) - 0.5 * s * (V @ c - c @ V)).reshape(-1)

    def trace(self) -> float:
        """``tr L = -σ (n tr(V_q²) - tr(V_q)²)`` with ``n = d^q``."""
        n = self.d**self.q
        V = self.Vq
        return float(-self.sys.sigma * (n * np.trace(V @ V).real - np.trace(V).real ** 2))

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator((self.dim, self.dim), matvec=self.matvec,
                                   rmatvec=self.rmatvec, dtype=complex)

    def propagate(self, t: float, x: np.ndarray) -> np.ndarray:
        """Return ``e^{tL} x`` for a vector or a block of column vectors."""
        if self.matrix is not None:
            from .algebra import expm
            return expm(t * self.matrix) @ x
        return spla.expm_multiply(t * self.as_linear_operator(), x, traceA=t * self.trace())


def build_liouvillean(sys: SystemSpec, q: int,
                      policy: NumericPolicy | None = None) -> LiouvilleanQ:
    policy = policy or DEFAULT_POLICY
    if q < 1:
        raise ValueError("q must be >= 1")
    d = sys.dim
    Hq = kron_sum_power(sys.H, q, policy)
    Vq = kron_sum_power(sys.V, q, policy)
    matrix = None
    if d ** (2 * q) <= policy.dense_cap:
        Vr = commutator_super(Vq)
        matrix = -1j * commutator_super(Hq) - 0.5 * sys.sigma * (Vr @ Vr)
    return LiouvilleanQ(sys, q, matrix, Hq, Vq)


def local_decomposition(Lq: LiouvilleanQ) -> tuple[np.ndarray, np.ndarray]:
    """Split the dense generator into single-copy terms and copy-copy terms."""
    if Lq.matrix is None:
        raise DenseCapError("local_decomposition needs a dense Liouvillean")
    q, s = Lq.q, Lq.sys.sigma
    Vr = [commutator_super(embed(Lq.sys.V, k, q)) for k in range(q)]
    local = sum(-1j * commutator_super(embed(Lq.sys.H, k, q)) - 0.5 * s * Vr[k] @ Vr[k]
                for k in range(q))
    inter = np.zeros_like(local)
    for k in range(q):
        for l in range(q):
            if k != l:
                inter -= 0.5 * s * Vr[k] @ Vr[l]
    return local, inter


# permutations -------------------------------------------------------------

def all_permutations(q: int) -> list[tuple[int, ...]]:
    """Permutations of ``range(q)`` in lexicographic order (image tuples)."""
    if q > 6:
        raise ValueError("q <= 6 required for permutation enumeration")
    return list(permutations(range(q)))


def compose(pi, sigma) -> tuple[int, ...]:
    """``(π σ)(k) = π(σ(k))``."""
    return tuple(pi[s] for s in sigma)


def inverse(sigma) -> tuple[int, ...]:
    inv = [0] * len(sigma)
    for k, s in enumerate(sigma):
        inv[s] = k
    return tuple(inv)


def cycle_count(sigma) -> int:
    seen = [False] * len(sigma)
    n = 0
    for k in range(len(sigma)):
        if not seen[k]:
            n += 1
            while not seen[k]:
                seen[k] = True
                k = sigma[k]
    return n


def sign(sigma) -> int:
    return -1 if (len(sigma) - cycle_count(sigma)) % 2 else 1


@dataclass(frozen=True)
class PermutationOperator:
    sigma: tuple
    d: int
    matrix: np.ndarray


def permutation_operator(sigma, d: int, q: int | None = None) -> PermutationOperator:
    """Operator moving tensor factor ``k`` to position ``σ(k)``.

    Basis state ``|i_1..i_q>`` goes to ``|i_{σ⁻¹(1)}..i_{σ⁻¹(q)}>``, which
    gives ``P_π P_σ = P_{πσ}``.
    """
    sigma = tuple(int(s) for s in sigma)
    q = len(sigma) if q is None else q
    if sorted(sigma) != list(range(q)):
        raise ValueError("sigma must be a permutation of range(q)")
    n = d**q
    idx = np.indices((d,) * q).reshape(q, -1)  # idx[k] = i_k for each column
    out_digits = idx[list(inverse(sigma))]
    out = np.ravel_multi_index(tuple(out_digits), (d,) * q)
    P = np.zeros((n, n))
    P[out, np.arange(n)] = 1.0
    return PermutationOperator(sigma, d, P)


def gram_matrix(d: int, q: int) -> np.ndarray:
    perms = all_permutations(q)
    return np.array([[float(d) ** cycle_count(compose(inverse(s), p)) for p in perms]
                     for s in perms])


def _pinv_sym(M: np.ndarray, rel: float) -> np.ndarray:
    w, U = np.linalg.eigh(M)
    cut = rel * np.abs(w).max()
    winv = np.where(np.abs(w) > cut, 1.0 / np.where(np.abs(w) > cut, w, 1.0), 0.0)
    return (U * winv) @ U.T


def _perm_stack(d: int, q: int) -> np.ndarray:
    return np.array([permutation_operator(s, d, q).matrix for s in all_permutations(q)])


def haar_twirl(rho0, d: int, q: int, policy: NumericPolicy | None = None) -> np.ndarray:
    """Haar average ``∫ U^{⊗q} ρ0 U^{†⊗q} dU`` via the permutation basis."""
    policy = policy or DEFAULT_POLICY
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d**q, d**q):
        raise ValueError("rho0 has the wrong shape")
    Ps = _perm_stack(d, q)
    Minv = _pinv_sym(gram_matrix(d, q), policy.pinv_tol)
    c = np.einsum("sij,ij->s", Ps, rho0)  # tr(P_σ^† ρ0), P real
    return np.einsum("p,pij->ij", Minv @ c, Ps)


@dataclass
class HaarProjector:
    d: int
    q: int
    gram: np.ndarray
    gram_pinv: np.ndarray
    projector: np.ndarray | None
    basis: np.ndarray  # columns vec(P_π)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.gram_pinv @ (self.basis.T @ x))


def haar_projector(d: int, q: int, policy: NumericPolicy | None = None) -> HaarProjector:
    policy = policy or DEFAULT_POLICY
    M = gram_matrix(d, q)
    Minv = _pinv_sym(M, policy.pinv_tol)
    W = _perm_stack(d, q).reshape(factorial(q), -1).T
    proj = None
    if d ** (2 * q) <= policy.dense_cap:
        proj = (W @ Minv @ W.T).astype(complex)
    return HaarProjector(d, q, M, Minv, proj, W)


# lifted excited states ------------------------------------------------------

def copy_shuffle(d: int, q: int) -> np.ndarray:
    """Index map from copy-major order ``(i1 j1, ..., iq jq)`` to the vec
    order ``(i1..iq, j1..jq)`` of a q-copy operator."""
    idx = np.indices((d,) * (2 * q)).reshape(2 * q, -1)  # digits in copy-major order
    i_digits = idx[0::2]
    j_digits = idx[1::2]
    return np.ravel_multi_index(tuple(np.vstack([i_digits, j_digits])), (d,) * (2 * q))


def copy_shuffle_matrix(d: int, q: int) -> np.ndarray:
    n = d ** (2 * q)
    S = np.zeros((n, n))
    S[copy_shuffle(d, q), np.arange(n)] = 1.0
    return S


def lifted_eigenprojection(spec1: Spectrum, i: int, j: int, q: int,
                           steady: int = 0) -> np.ndarray:
    """Excited projector of L₁ on copy ``j`` (1-based) and steady projectors
    on the others, expressed on the q-copy vectorized space."""
    n1 = spec1.right_vectors.shape[0]
    d = int(round(np.sqrt(n1)))
    if d * d != n1:
        raise ValueError("spectrum is not that of a single-copy Liouvillean")
    if not 1 <= j <= q:
        raise ValueError("j must satisfy 1 <= j <= q")
    P0 = spec1.projector(steady)
    Pi = spec1.projector(i)
    factors = [P0] * q
    factors[j - 1] = Pi
    T = factors[0]
    for F in factors[1:]:
        T = np.kron(T, F)
    S = copy_shuffle_matrix(d, q)
    return S @ T @ S.T
