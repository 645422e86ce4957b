"""Spectral and singular gaps, mixing-time bounds and scaling fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .algebra import DEFAULT_POLICY, DenseCapError, NumericPolicy, expm
from .liouville import LiouvilleanQ, build_liouvillean, gram_matrix, haar_projector
from .model import ChainSpec, SystemSpec, chain_system


@dataclass
class GapReport:
    lambda_star: float
    steady_dim: int
    eigenvalues: np.ndarray
    kappa: float
    zero_tol: float
    flags: list = field(default_factory=list)


@dataclass
class MixingEstimate:
    t_upper: float
    t_lower: float
    q: int
    d: int


def _gap_from_eigs(w: np.ndarray, zero_tol: float) -> tuple[float, int]:
    steady = int(np.sum(np.abs(w) <= zero_tol))
    r = np.abs(w.real)
    nz = r[r > zero_tol]
    lam = float(nz.min()) if nz.size else float("nan")
    return lam, steady


def spectral_gap(Lq: LiouvilleanQ, zero_tol: float | None = None,
                 with_kappa: bool = True,
                 policy: NumericPolicy | None = None) -> GapReport:
    """Smallest non-zero ``|Re λ|`` of a dense Liouvillean.

    ``zero_tol`` is absolute; by default it is ``policy.zero_tol`` times the
    spectral radius.  ``kappa`` is the 2-norm condition number of the
    eigenvector matrix after balanced biorthonormal scaling.
    """
    policy = policy or DEFAULT_POLICY
    if Lq.matrix is None:
        raise DenseCapError(f"spectral_gap needs a dense Liouvillean (dimension {Lq.dim} exceeds the cap)")
    A = Lq.matrix
    flags = []
    if with_kappa:
        w, Lv, R = sla.eig(A, left=True, right=True)
    else:
        w = sla.eigvals(A)
    radius = max(np.abs(w).max(), 1e-300)
    tol = policy.zero_tol * radius if zero_tol is None else zero_tol
    lam, steady = _gap_from_eigs(w, tol)
    kappa = float("nan")
    if with_kappa:
        R = R / np.linalg.norm(R, axis=0)
        Lv = Lv / np.linalg.norm(Lv, axis=0)
        s = np.abs(np.sum(Lv.conj() * R, axis=0))
        if s.min() < 1e-14:
            flags.append("defective")
        else:
            kappa = float(np.linalg.cond(R / np.sqrt(s)))
    rank = np.linalg.matrix_rank(gram_matrix(Lq.d, Lq.q))
    if steady != rank:
        flags.append(f"steady_dim {steady} != gram rank {rank}")
    order = np.lexsort((-w.imag, -w.real))
    return GapReport(lam, steady, w[order], kappa, tol, flags)


def singular_gap(Lq: LiouvilleanQ, t: float, report: GapReport | None = None,
                 policy: NumericPolicy | None = None) -> tuple[float, float]:
    """Largest singular value of ``e^{tL}`` outside the steady block and the
    relative deviation ``|λ* + log(s*)/t| / λ*`` of the rate it implies."""
    if t <= 0:
        raise ValueError("t must be positive")
    policy = policy or DEFAULT_POLICY
    report = report or spectral_gap(Lq, with_kappa=False, policy=policy)
    k = report.steady_dim
    if Lq.matrix is not None:
        s = np.linalg.svd(expm(t * Lq.matrix), compute_uv=False)
        s_star = float(s[k]) if k < s.size else 0.0
    else:
        s_star = _power_singular(Lq, t, policy)
    rate = -math.log(s_star) / t if s_star > 0 else float("inf")
    delta = abs(report.lambda_star - rate) / report.lambda_star
    return s_star, float(delta)


def _power_singular(Lq: LiouvilleanQ, t: float, policy: NumericPolicy,
                    maxiter: int = 200, tol: float = 1e-8) -> float:
    """Top singular value of ``e^{tL}(1 - U∞)`` by power iteration."""
    P = haar_projector(Lq.d, Lq.q, policy)
    op = Lq.as_linear_operator()
    adj = spla.LinearOperator(op.shape, matvec=Lq.rmatvec, rmatvec=Lq.matvec, dtype=complex)
    tr = t * Lq.trace()
    rng = np.random.default_rng(0)
    x = rng.standard_normal(Lq.dim) + 1j * rng.standard_normal(Lq.dim)
    x -= P.apply(x)
    x /= np.linalg.norm(x)
    s_old = 0.0
    for _ in range(maxiter):
        y = spla.expm_multiply(t * op, x, traceA=tr)
        # adjoint of e^{tL} is e^{tL^†}
        z = spla.expm_multiply(t * adj, y, traceA=tr)
        z -= P.apply(z)
        s2 = np.linalg.norm(z)
        x = z / s2
        s = math.sqrt(s2)
        if abs(s - s_old) <= tol * s:
            break
        s_old = s
    return s


def mixing_bounds(report: GapReport, q: int, d: int, c: float = 1.0) -> MixingEstimate:
    """Upper and lower mixing-time estimates from the gap.

    ``t_upper = (4 q log d + 2 log κ) / λ*`` and ``t_lower = c q / λ*``.
    """
    kappa = report.kappa if np.isfinite(report.kappa) else 1.0
    lam = report.lambda_star
    up = (4 * q * math.log(d) + 2 * math.log(max(kappa, 1.0))) / lam
    return MixingEstimate(up, c * q / lam, q, d)


def measured_mixing_time(Lq: LiouvilleanQ, eps: float = 0.1, t_grid=None,
                         report: GapReport | None = None) -> float:
    """First grid time at which every computational-basis product state
    (and the maximally coherent state) is within trace distance ``eps``
    of its Haar twirl."""
    report = report or spectral_gap(Lq, with_kappa=False)
    if t_grid is None:
        t_grid = np.linspace(0, 20 * Lq.q / report.lambda_star, 801)[1:]
    n = Lq.d**Lq.q
    P = haar_projector(Lq.d, Lq.q)
    states = []
    for i in range(n):
        r = np.zeros((n, n), complex)
        r[i, i] = 1
        states.append(r.reshape(-1))
    psi = np.ones(n) / np.sqrt(n)
    states.append(np.outer(psi, psi).astype(complex).reshape(-1))
    X = np.array(states).T
    Xinf = P.apply(X)
    Y = X.copy()
    t_prev = 0.0
    steps: dict[float, np.ndarray] = {}
    for t in t_grid:
        h = round(float(t - t_prev), 12)
        if h not in steps:
            steps[h] = expm(h * Lq.matrix)
        Y = steps[h] @ Y
        t_prev = t
        D = Y - Xinf
        dist = max(0.5 * np.abs(np.linalg.eigvalsh(
            (D[:, k].reshape(n, n) + D[:, k].reshape(n, n).conj().T) / 2)).sum()
            for k in range(D.shape[1]))
        if dist <= eps:
            return float(t)
    return float("inf")


def gap_vs_q_scan(sys: SystemSpec, q_max: int,
                  policy: NumericPolicy | None = None) -> tuple[list, list]:
    """Gaps for ``q = 1..q_max``; returns ``(rows, flags)`` where the scan
    stops early (with a flag) once the dense cap is hit."""
    policy = policy or DEFAULT_POLICY
    rows, flags = [], []
    for q in range(1, q_max + 1):
        if sys.dim ** (2 * q) > policy.dense_cap:
            flags.append(f"truncated at q={q - 1}: dense cap")
            break
        rep = spectral_gap(build_liouvillean(sys, q, policy), with_kappa=False,
                           policy=policy)
        rows.append((q, rep.lambda_star))
    return rows, flags


def chain_gap(L: int, sigma: float, q: int = 1, c: int = 1) -> float:
    Lq = build_liouvillean(chain_system(ChainSpec(L, c), sigma), q)
    return spectral_gap(Lq, with_kappa=False).lambda_star


def gap_scaling_fit(family, sigma: float, q: int = 1) -> tuple[float, float]:
    """Least-squares fit ``log λ* = exponent · log L + log prefactor``."""
    family = [f if isinstance(f, ChainSpec) else ChainSpec(int(f)) for f in family]
    if len(family) < 4:
        raise ValueError("at least four lengths are needed")
    Ls = np.array([f.L for f in family], dtype=float)
    gaps = np.array([chain_gap(f.L, sigma, q, f.c) for f in family])
    slope, icpt = np.polyfit(np.log(Ls), np.log(gaps), 1)
    return float(slope), float(math.exp(icpt))


def expander_distance_semigroup(Lq: LiouvilleanQ, t: float,
                                policy: NumericPolicy | None = None) -> float:
    """Operator 2-norm ``‖e^{tL} - U∞‖`` on the vectorized space."""
    P = haar_projector(Lq.d, Lq.q, policy)
    if Lq.matrix is None or P.projector is None:
        return _power_singular(Lq, t, policy or DEFAULT_POLICY) if t > 0 else 1.0
    return float(np.linalg.norm(expm(t * Lq.matrix) - P.projector, 2))


def strong_gap_formula(L: int, sigma: float) -> float:
    return 8.0 / (sigma * L) * math.sin(math.pi / L) ** 2


def sigma_s(L: int, sigmas, rel: float = 0.01) -> float:
    """Smallest grid ``σ`` beyond which the dense gap stays within ``rel``
    of the strong-driving formula."""
    sigmas = np.sort(np.asarray(sigmas, dtype=float))
    ok = np.array([abs(chain_gap(L, s) - strong_gap_formula(L, s)) / strong_gap_formula(L, s)
                   < rel for s in sigmas])
    for i in range(len(sigmas)):
        if ok[i:].all():
            return float(sigmas[i])
    return float("nan")
