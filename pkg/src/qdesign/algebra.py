"""Dense complex linear algebra used throughout the package.

Vectorization is row-major: ``vec(X) = X.reshape(-1)``, so that
``vec(A X B) = kron(A, B.T) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np
import scipy.linalg as sla


class DenseCapError(ValueError):
    """Raised when a dense object would exceed the configured size cap."""


class DefectiveSpectrumError(np.linalg.LinAlgError):
    """Raised when an eigendecomposition hits a non-diagonalizable cluster."""

    def __init__(self, message: str, cluster=None):
        super().__init__(message)
        self.cluster = cluster


@dataclass(frozen=True)
class NumericPolicy:
    """Central record of tolerances and size caps.

    Relative tolerances are multiplied by the norm or spectral radius of
    the object they are applied to.
    """

    dense_cap: int = 4096
    zero_tol: float = 1e-9
    biorth_tol: float = 1e-8
    cluster_tol: float = 1e-9
    pinv_tol: float = 1e-10
    res_tol: float = 1e-8
    lie_cap: int = 12
    deterministic: bool = False

    def with_(self, **kw) -> "NumericPolicy":
        return replace(self, **kw)


DEFAULT_POLICY = NumericPolicy()


def check_cap(n: int, policy: NumericPolicy | None = None, what: str = "matrix"):
    cap = (policy or DEFAULT_POLICY).dense_cap
    if n > cap:
        raise DenseCapError(f"{what} dimension {n} exceeds dense cap {cap}")


def as_matrix(A, hermitian: bool = False, name: str = "A") -> np.ndarray:
    """Return ``A`` as a 2-D complex array, optionally checking Hermiticity."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {A.shape}")
    if hermitian:
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{name} must be square")
        scale = max(np.abs(A).max(initial=0.0), 1e-300)
        if np.abs(A - A.conj().T).max(initial=0.0) >= 1e-12 * scale and scale > 1e-300:
            raise ValueError(f"{name} is not Hermitian")
    return A


def dag(A: np.ndarray) -> np.ndarray:
    return np.conj(A).T


def kron(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices."""
    return reduce(np.kron, mats)


def kron_sum_power(X, q: int, policy: NumericPolicy | None = None) -> np.ndarray:
    """Kronecker sum ``X ⊕ X ⊕ ... ⊕ X`` with ``q`` terms.

    Each term places ``X`` on one tensor factor and identities elsewhere.
    """
    X = as_matrix(X, name="X")
    if X.shape[0] != X.shape[1]:
        raise ValueError("X must be square")
    if q < 1:
        raise ValueError("q must be >= 1")
    d = X.shape[0]
    check_cap(d**q, policy, "Kronecker sum")
    out = np.zeros((d**q, d**q), dtype=complex)
    for k in range(q):
        out += np.kron(np.kron(np.eye(d**k), X), np.eye(d ** (q - k - 1)))
    return out


def embed(X, k: int, q: int) -> np.ndarray:
    """Place ``X`` on tensor factor ``k`` (0-based) of ``q`` copies."""
    X = np.asarray(X, dtype=complex)
    d = X.shape[0]
    return np.kron(np.kron(np.eye(d**k), X), np.eye(d ** (q - k - 1)))


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1)


def unvec(v) -> np.ndarray:
    v = np.asarray(v)
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape(n, n)


def commutator_super(X) -> np.ndarray:
    """Superoperator of ``ρ -> [X, ρ]`` acting on ``vec(ρ)``."""
    X = as_matrix(X, name="X")
    if X.shape[0] != X.shape[1]:
        raise ValueError("X must be square")
    eye = np.eye(X.shape[0])
    return np.kron(X, eye) - np.kron(eye, X.T)


def expm(A) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Padé approximants)."""
    A = as_matrix(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("expm input has non-finite entries")
    return sla.expm(A)


@dataclass
class Spectrum:
    """Eigen-triplets with biorthonormal left/right vectors.

    Columns of ``right_vectors`` and ``left_vectors`` satisfy
    ``L_j^H R_k = δ_jk``; eigenvalues are sorted by decreasing real part.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    biorth_residual: float
    reconstruction_residual: float = 0.0
    clusters: list = field(default_factory=list)

    def projector(self, j: int) -> np.ndarray:
        return np.outer(self.right_vectors[:, j], self.left_vectors[:, j].conj())


def _clusters(w: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group indices of ``w`` (already sorted) whose values are within ``tol``."""
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.lexsort((w.imag, w.real))
    for a in range(n):
        for b in range(a + 1, n):
            i, j = order[a], order[b]
            if w[j].real - w[i].real > tol:
                break
            if abs(w[i] - w[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(sorted(g)) for g in groups.values()]


def eig_biorthonormal(A, tol: float | None = None,
                      policy: NumericPolicy | None = None) -> Spectrum:
    """Non-Hermitian eigendecomposition with biorthonormal left vectors.

    Parameters
    ----------
    A : array_like
        Square complex matrix.
    tol : float, optional
        Relative reconstruction tolerance; defaults to the policy's
        ``biorth_tol``.

    Returns
    -------
    Spectrum
        ``A = Σ λ_j R_j L_j^H`` with ``L^H R = I``.

    Raises
    ------
    DefectiveSpectrumError
        If a cluster of (near) equal eigenvalues does not span an
        eigenspace of full dimension.
    """
    policy = policy or DEFAULT_POLICY
    tol = policy.biorth_tol if tol is None else tol
    A = as_matrix(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    norm = max(np.linalg.norm(A, 2), 1e-300)
    if np.allclose(A, dag(A), atol=1e-14 * norm, rtol=0):
        w, R = np.linalg.eigh((A + dag(A)) / 2)
        w = w.astype(complex)
        order = np.argsort(-w.real, kind="stable")
        w, R = w[order], R[:, order]
        return Spectrum(w, R, R.copy(), float(np.abs(dag(R) @ R - np.eye(n)).max()))
    w, Lv, R = sla.eig(A, left=True, right=True)
    order = np.lexsort((-w.imag, -w.real))
    w, Lv, R = w[order], Lv[:, order], R[:, order]
    R = R / np.linalg.norm(R, axis=0)
    Lv = Lv / np.linalg.norm(Lv, axis=0)
    groups = _clusters(w, policy.cluster_tol * norm)
    multi = [g for g in groups if len(g) > 1]
    for g in groups:
        Rg, Lg = R[:, g], Lv[:, g]
        G = dag(Lg) @ Rg
        sv = np.linalg.svd(Rg, compute_uv=False)
        if sv[-1] < np.sqrt(tol) or np.linalg.cond(G) > 1 / tol:
            raise DefectiveSpectrumError(
                f"defective eigenvalue cluster near {w[g[0]]:.6g} (size {len(g)})",
                cluster=w[g])
        # L_g <- L_g G^{-H} so that L_g^H R_g = I
        Lv[:, g] = Lg @ np.linalg.inv(G).conj().T
        if len(g) > 1:
            w[g] = w[g].mean()
    # balance scale of each pair
    scale = np.sqrt(np.linalg.norm(Lv, axis=0) / np.linalg.norm(R, axis=0))
    R = R * scale
    Lv = Lv / scale
    biorth = float(np.abs(dag(Lv) @ R - np.eye(n)).max())
    rec = np.linalg.norm(A - (R * w) @ dag(Lv), 2) / norm
    if rec > tol:
        raise DefectiveSpectrumError(f"reconstruction residual {rec:.3g} exceeds {tol:g}",
                                     cluster=None)
    return Spectrum(w, R, Lv, biorth, rec, [w[g] for g in multi])


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def null_space(A, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``A``.

    ``tol`` is an absolute singular-value threshold; by default
    ``1e-10 * max(1, ‖A‖)``.
    """
    A = as_matrix(A)
    if A.size == 0:
        return np.eye(A.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(A)
    if tol is None:
        tol = 1e-10 * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T
