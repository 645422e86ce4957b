"""Richardson–Gaudin solvers for the strong-driving chain.

Roots ``ω`` live on the real line.  For a problem with levels
``j = 1..r``, poles ``z_k`` carrying weights ``μ^k_j`` and Cartan matrix
``C``, the Bethe equations read

    Σ_k μ^k_j / (ω_jα - z_k) - Σ_{(i,β) ≠ (j,α)} C_ij / (ω_jα - ω_iβ) = 0,

which is the stationarity condition of

    W = Σ_{jα,k} μ^k_j log|ω_jα - z_k| - Σ_{pairs} C_ij log|ω_jα - ω_iβ|

with every unordered pair of roots counted once.  The SU(1,1) problem of
the fully symmetric sector is the one-level case with ``C = [[-2]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement, product

import numpy as np
from scipy.optimize import least_squares

from .effective import gaudin_couplings


class BetheConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float = float("inf")):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class GaudinCouplings:
    L: int
    g: np.ndarray
    sigma: float = 1.0

    @classmethod
    def chain(cls, L: int, sigma: float = 1.0) -> "GaudinCouplings":
        if L < 2:
            raise ValueError("L must be >= 2")
        return cls(L, gaudin_couplings(L), float(sigma))


@dataclass(frozen=True)
class ExcitationPattern:
    """Unpaired occupations per mode ``k = 1..L-1`` and the pair number."""

    n_up: tuple
    n_down: tuple
    N: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_up", tuple(int(x) for x in self.n_up))
        object.__setattr__(self, "n_down", tuple(int(x) for x in self.n_down))
        if len(self.n_up) != len(self.n_down):
            raise ValueError("n_up and n_down must have equal length")
        if min(self.n_up + self.n_down, default=0) < 0 or self.N < 0:
            raise ValueError("occupations and N must be non-negative")
        if any(u * d for u, d in zip(self.n_up, self.n_down)):
            raise ValueError("a mode cannot carry both spin species")

    @property
    def n(self) -> np.ndarray:
        return np.array(self.n_up) + np.array(self.n_down)

    @classmethod
    def for_q(cls, n_up, n_down, q: int) -> "ExcitationPattern":
        """Pattern with ``N = q - Σ n_up`` pairs (equal numbers of each
        species are unpaired)."""
        if sum(n_up) != sum(n_down):
            raise ValueError("unpaired up and down numbers must agree")
        N = q - sum(n_up)
        if N < 0:
            raise ValueError("too many unpaired particles for q")
        return cls(n_up, n_down, N)


@dataclass
class BetheProblem:
    poles: np.ndarray          # z_0 = 0, z_k = 2/g_k
    mu: np.ndarray             # shape (L, levels)
    cartan: np.ndarray
    levels: int
    q: int
    g: np.ndarray
    sigma: float
    offset: float = 0.0        # Σ g_k (n↑ + n↓)
    eig_level: int = 0         # 0-based level whose roots enter λ

    def merged_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct poles and their summed weights per level,
        shape ``(poles, levels)``."""
        cache = self.__dict__.get("_merged")
        if cache is None:
            order = np.argsort(self.poles, kind="stable")
            z, w = [], []
            for k in order:
                zk = self.poles[k]
                if z and abs(zk - z[-1]) <= 1e-12 * max(1.0, abs(zk)):
                    w[-1] = w[-1] + self.mu[k]
                else:
                    z.append(zk)
                    w.append(np.array(self.mu[k], dtype=float))
            cache = (np.array(z), np.array(w))
            self.__dict__["_merged"] = cache
        return cache

    def merged(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct poles carrying non-zero weight at level ``j`` (0-based)."""
        z, w = [], []
        for zk, mk in sorted(zip(self.poles, self.mu[:, j])):
            if mk == 0:
                continue
            if z and abs(zk - z[-1]) <= 1e-12 * max(1.0, abs(zk)):
                w[-1] += mk
            else:
                z.append(zk)
                w.append(float(mk))
        return np.array(z), np.array(w)


@dataclass
class BetheRoots:
    omega: list
    residuals: np.ndarray
    iterations: int = 0
    restarts: int = 0

    @property
    def E(self) -> list:
        return [1.0 / np.asarray(o) for o in self.omega]


# residuals and potential ---------------------------------------------------

def _unpack(x: np.ndarray, counts) -> list[np.ndarray]:
    out, s = [], 0
    for c in counts:
        out.append(x[s:s + c])
        s += c
    return out


def _flat(p: BetheProblem, omega: list) -> tuple[np.ndarray, np.ndarray]:
    x = np.concatenate([np.asarray(o, float) for o in omega]) if omega else np.zeros(0)
    lev = np.concatenate([np.full(len(o), j) for j, o in enumerate(omega)]).astype(int) \
        if omega else np.zeros(0, int)
    return x, lev


def _terms(p: BetheProblem, x: np.ndarray, lev: np.ndarray):
    z, w = p.merged_table()
    Wm = w[:, lev].T                      # (n, poles)
    dz = x[:, None] - z[None, :]
    C = p.cartan[np.ix_(lev, lev)].astype(float)
    np.fill_diagonal(C, 0.0)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    return Wm, dz, C, dx


def bethe_residual(p: BetheProblem, omega: list) -> np.ndarray:
    """Left-hand sides of the Bethe equations, one per root."""
    x, lev = _flat(p, omega)
    if x.size == 0:
        return np.zeros(0)
    Wm, dz, C, dx = _terms(p, x, lev)
    # a root sitting on a pole yields a non-finite residual, rejected by the caller
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(Wm / dz, axis=1) - np.sum(C / dx, axis=1)


def bethe_jacobian(p: BetheProblem, omega: list) -> np.ndarray:
    x, lev = _flat(p, omega)
    if x.size == 0:
        return np.zeros((0, 0))
    Wm, dz, C, dx = _terms(p, x, lev)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = C / dx**2
        J = -T
        J[np.diag_indices_from(J)] = -np.sum(Wm / dz**2, axis=1) + np.sum(T, axis=1)
    return J


def potential(p: BetheProblem, omega: list) -> float:
    """Electrostatic function ``W`` whose gradient is the Bethe residual."""
    W = 0.0
    flat = [(j, x) for j in range(p.levels) for x in omega[j]]
    for j, x in flat:
        zj, wj = p.merged(j)
        W += float(np.sum(wj * np.log(np.abs(x - zj))))
    for a in range(len(flat)):
        for b in range(a + 1, len(flat)):
            (j, x), (i, y) = flat[a], flat[b]
            if p.cartan[i, j]:
                W -= p.cartan[i, j] * math.log(abs(x - y))
    return W


def eigenvalue(p: BetheProblem, omega: list) -> float:
    return -(2.0 / p.sigma) * (p.offset + 4.0 * float(np.sum(1.0 / np.asarray(omega[p.eig_level]))))


# seeding ---------------------------------------------------------------------

def seed_layout(p: BetheProblem, root_counts, layout=None, rng=None,
                jitter: float = 1e-3) -> list[np.ndarray]:
    """Initial roots.

    ``layout[j]`` lists how many roots of level ``j`` go into each gap
    between consecutive distinct poles of the whole problem.  By default
    roots fill the gaps of their own poles from the top (largest ω) down;
    levels without poles are placed between roots of neighbouring levels.
    """
    rng = rng or np.random.default_rng(0)
    allz = np.unique(np.round(p.poles, 12))
    gaps = list(zip(allz[:-1], allz[1:]))
    seeds: list[np.ndarray] = [np.zeros(0)] * p.levels
    order = sorted(range(p.levels), key=lambda j: abs(j - p.eig_level))
    for j in order:
        M = int(root_counts[j])
        if M == 0:
            seeds[j] = np.zeros(0)
            continue
        if layout is not None and layout[j] is not None:
            cnt = list(layout[j])
        else:
            cnt = [0] * len(gaps)
            for m in range(M):
                cnt[len(gaps) - 1 - (m % len(gaps))] += 1
        pts = []
        if layout is None and p.mu[:, j].sum() == 0:
            # no poles on this level: sit between neighbouring-level roots
            nb = np.sort(np.concatenate([seeds[i] for i in (j - 1, j + 1)
                                         if 0 <= i < p.levels and seeds[i].size]
                                        or [np.array([allz.mean()])]))
            ext = np.concatenate([[allz[0]], nb, [allz[-1]]])
            mids = sorted(0.5 * (ext[1:] + ext[:-1]), reverse=True)
            for m in range(M):
                pts.append(mids[m % len(mids)] * (1 + 0.05 * (m // len(mids))))
        else:
            for (lo, hi), c in zip(gaps, cnt):
                for m in range(c):
                    pts.append(lo + (hi - lo) * (m + 1) / (c + 1))
        pts = np.array(pts, dtype=float)
        span = allz[-1] - allz[0]
        pts = pts + jitter * span * rng.uniform(-0.5, 0.5, pts.size) / max(len(gaps), 1)
        seeds[j] = np.sort(pts)
    return seeds


# solvers --------------------------------------------------------------------

def _newton(p: BetheProblem, omega0: list, tol: float = 1e-12,
            max_iter: int = 500) -> tuple[list, int]:
    counts = [len(o) for o in omega0]
    x = np.concatenate([np.asarray(o, float) for o in omega0]) if sum(counts) else np.zeros(0)
    if x.size == 0:
        return [np.zeros(0)] * p.levels, 0
    zmin, zmax = p.poles.min(), p.poles.max()

    def norm(v):
        return float(np.linalg.norm(v))

    f = bethe_residual(p, _unpack(x, counts))
    for it in range(1, max_iter + 1):
        if not np.all(np.isfinite(f)):
            raise BetheConvergenceError("non-finite residual")
        if norm(f) <= tol * max(1.0, np.abs(x).max()):
            return _unpack(x, counts), it
        J = bethe_jacobian(p, _unpack(x, counts))
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        t = 1.0
        f0 = norm(f)
        while t > 1e-8:
            xn = x + t * step
            if np.all((xn > zmin - 1e-9 * zmax) & (xn < zmax * (1 + 1e-9))) or t < 1e-4:
                fn = bethe_residual(p, _unpack(xn, counts))
                if np.all(np.isfinite(fn)) and norm(fn) < f0 * (1 - 1e-4 * t):
                    break
            t *= 0.5
        else:
            raise BetheConvergenceError("line search failed", f0)
        x, f = xn, fn
    raise BetheConvergenceError("Newton did not converge", norm(f))


def _check_roots(p: BetheProblem, omega: list, tol: float) -> np.ndarray:
    flat = np.concatenate([np.asarray(o) for o in omega]) if omega else np.zeros(0)
    zmin, zmax = p.poles.min(), p.poles.max()
    span = zmax - zmin
    if flat.size and (flat.min() <= zmin or flat.max() >= zmax):
        raise BetheConvergenceError("root escaped the pole interval")
    for j in range(p.levels):
        o = np.sort(omega[j])
        if o.size > 1 and np.diff(o).min() < 1e-9 * span:
            raise BetheConvergenceError("colliding roots")
        zj, _ = p.merged(j)
        for x in o:
            if zj.size and np.abs(x - zj).min() < 1e-9 * span:
                raise BetheConvergenceError("root on a pole")
    res = bethe_residual(p, omega)
    if res.size and np.abs(res).max() > tol:
        raise BetheConvergenceError("residual above tolerance", float(np.abs(res).max()))
    return res


def solve_problem(p: BetheProblem, root_counts, layout=None, seed: int = 0,
                  restarts: int = 8, tol: float = 1e-10) -> tuple[BetheRoots, float]:
    """Damped Newton from the layout seeds, retried from jittered seeds and
    finally handed to :func:`electrostatic_relax`."""
    root_counts = [int(c) for c in root_counts]
    if len(root_counts) != p.levels:
        raise ValueError("one root count per level is required")
    rng = np.random.default_rng(seed)
    best = float("inf")
    for attempt in range(restarts + 1):
        omega0 = seed_layout(p, root_counts, layout, rng,
                             jitter=1e-3 if attempt == 0 else 0.1 * attempt / restarts)
        try:
            omega, it = _newton(p, omega0, max_iter=150)
            res = _check_roots(p, omega, tol)
            return BetheRoots([np.sort(o) for o in omega], res, it, attempt), eigenvalue(p, omega)
        except BetheConvergenceError as e:
            best = min(best, e.best_residual)
    try:
        roots = electrostatic_relax(p, root_counts, seed_layout(p, root_counts, layout, rng),
                                    max_restarts=2)
        return roots, eigenvalue(p, roots.omega)
    except BetheConvergenceError as e:
        best = min(best, e.best_residual)
    raise BetheConvergenceError("Bethe solver failed", best)


def electrostatic_relax(p: BetheProblem, root_counts, seed_layout_roots,
                        tol: float = 1e-10, max_restarts: int = 20,
                        seed: int = 0) -> BetheRoots:
    """Drive the roots to a stationary point of ``W`` on the real line.

    Stationary points of ``W`` are generally saddles, so the relaxation
    minimizes ``½‖∇W‖²`` with every root kept inside the pole interval.
    """
    counts = [int(c) for c in root_counts]
    zmin, zmax = p.poles.min(), p.poles.max()
    span = zmax - zmin
    lo, hi = zmin + 1e-12 * span, zmax - 1e-12 * span
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([np.asarray(o, float) for o in seed_layout_roots])
    if x0.size == 0:
        return BetheRoots([np.zeros(0)] * p.levels, np.zeros(0))
    best = float("inf")
    for r in range(max_restarts + 1):
        x = np.clip(x0, lo, hi)
        sol = least_squares(lambda v: bethe_residual(p, _unpack(v, counts)), x,
                            jac=lambda v: bethe_jacobian(p, _unpack(v, counts)),
                            bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=2000, method="trf")
        omega = [np.sort(o) for o in _unpack(sol.x, counts)]
        try:
            omega, it = _newton(p, omega, max_iter=50)
            res = _check_roots(p, omega, tol)
            return BetheRoots([np.sort(o) for o in omega], res, sol.nfev + it, r)
        except BetheConvergenceError as e:
            best = min(best, e.best_residual, float(np.abs(sol.fun).max()))
        x0 = x0 + 1e-2 * span * rng.standard_normal(x0.size)
    raise BetheConvergenceError("electrostatic relaxation failed", best)


# problem builders -------------------------------------------------------------

def su11_problem(c: GaudinCouplings, pattern: ExcitationPattern) -> BetheProblem:
    n = pattern.n
    if n.size != c.L - 1:
        raise ValueError("pattern length must be L-1")
    poles = np.concatenate([[0.0], 2.0 / c.g])
    mu = np.concatenate([[1.0], n + 1.0])[:, None]
    return BetheProblem(poles, mu, np.array([[-2.0]]), 1, 0, c.g, c.sigma,
                        float(np.dot(c.g, n)), 0)


def solve_su11(c: GaudinCouplings, pattern: ExcitationPattern, M: int | None = None,
               layout=None, seed: int = 0) -> tuple[BetheRoots, float]:
    """Fully symmetric sector: ``M ≤ N`` non-zero pair energies, the rest zero.

    ``λ = -(2/σ)(Σ_k g_k n_k + 4 Σ_α E_α)`` with ``E_α = 1/ω_α``.
    """
    M = pattern.N if M is None else M
    if M > pattern.N:
        raise ValueError("at most N non-zero roots")
    p = su11_problem(c, pattern)
    roots, lam = solve_problem(p, [M], None if layout is None else [layout], seed)
    return roots, lam


def su2_problem(c: GaudinCouplings, pattern: ExcitationPattern) -> BetheProblem:
    n = pattern.n
    if np.any(n > 1):
        raise ValueError("SU(2) patterns have n_k in {0, 1}")
    poles = np.concatenate([[0.0], 2.0 / c.g])
    mu = np.concatenate([[1.0], 1.0 - n])[:, None]
    return BetheProblem(poles, mu, np.array([[2.0]]), 1, 1, c.g, c.sigma,
                        float(np.dot(c.g, n)), 0)


def su2_energy_residual(c: GaudinCouplings, n, E) -> np.ndarray:
    """``Σ_k g_k(1-n_k)/(2E_α-g_k) - 2 Σ_β E_β/(E_α-E_β) - 1``."""
    E = np.asarray(E, float)
    g = c.g
    w = g * (1 - np.asarray(n))
    out = np.empty(E.size)
    for a in range(E.size):
        others = np.delete(E, a)
        out[a] = np.sum(w / (2 * E[a] - g)) - 2 * np.sum(others / (E[a] - others)) - 1
    return out


def solve_su2(c: GaudinCouplings, pattern: ExcitationPattern, M: int | None = None,
              layout=None, seed: int = 0) -> tuple[BetheRoots, float]:
    """Fully antisymmetric sector (Pauli-blocked modes).

    Roots are found in the energy form and then verified against the
    ``ω`` form of the same equations.
    """
    Z = int(np.sum(pattern.n == 0))
    M = min(pattern.N, Z + 1 - pattern.N) if M is None else M
    if M > pattern.N or M > Z + 1 - pattern.N:
        raise ValueError("root count not admissible")
    p = su2_problem(c, pattern)
    rng = np.random.default_rng(seed)
    last = float("inf")
    for attempt in range(21):
        om0 = seed_layout(p, [M], None if layout is None else [layout], rng,
                          jitter=1e-3 if attempt == 0 else 0.1 * attempt / 20)[0]
        E = 1.0 / om0 if M else np.zeros(0)
        it = 0
        for it in range(1, 501):
            f = su2_energy_residual(c, pattern.n, E)
            if not np.all(np.isfinite(f)):
                break
            if np.abs(f).max(initial=0) < 1e-13:
                break
            h = 1e-7 * np.maximum(np.abs(E), 1e-3)
            J = np.empty((M, M))
            for b in range(M):
                Ep = E.copy()
                Ep[b] += h[b]
                J[:, b] = (su2_energy_residual(c, pattern.n, Ep) - f) / h[b]
            try:
                E = E - np.linalg.solve(J, f)
            except np.linalg.LinAlgError:
                break
        try:
            if M and (not np.all(np.isfinite(E)) or np.any(E <= 0)):
                raise BetheConvergenceError("non-physical energy")
            omega, it2 = _newton(p, [1.0 / E if M else np.zeros(0)], max_iter=50)
            res = _check_roots(p, omega, 1e-10)
            return BetheRoots([np.sort(omega[0])], res, it + it2, attempt), eigenvalue(p, omega)
        except BetheConvergenceError as e:
            last = min(last, e.best_residual)
    roots, lam = solve_problem(p, [M], None if layout is None else [layout], seed)
    return roots, lam


def fundamental_level(q: int, n_up: int, n_down: int) -> int:
    return q + n_up - n_down


def build_su2q_problem(c: GaudinCouplings, q: int, pattern: ExcitationPattern) -> BetheProblem:
    """Poles and weights of the general (all copy operators) sector.

    Mode ``k`` with ``n↑`` unpaired up or ``n↓`` unpaired down particles
    carries the fundamental weight of level ``m = q + n↑ - n↓``; levels
    ``0`` and ``2q`` carry no weight.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if len(pattern.n_up) != c.L - 1:
        raise ValueError("pattern length must be L-1")
    levels = 2 * q - 1
    mu = np.zeros((c.L, levels))
    mu[0, q - 1] = 1.0
    for k, (u, d) in enumerate(zip(pattern.n_up, pattern.n_down), start=1):
        if u > q or d > q:
            raise ValueError("at most q particles of a species per mode")
        m = fundamental_level(q, u, d)
        if 1 <= m <= levels:
            mu[k, m - 1] = 1.0
    C = 2 * np.eye(levels) - np.eye(levels, k=1) - np.eye(levels, k=-1)
    poles = np.concatenate([[0.0], 2.0 / c.g])
    return BetheProblem(poles, mu, C, levels, q, c.g, c.sigma,
                        float(np.dot(c.g, pattern.n)), q - 1)


def inverse_cartan_F(q: int) -> np.ndarray:
    """``F = C^{-1}`` for SU(2q) (all simple roots have length² 2)."""
    r = 2 * q - 1
    C = 2 * np.eye(r) - np.eye(r, k=1) - np.eye(r, k=-1)
    return np.linalg.inv(C)


def solve_su2q(p: BetheProblem, root_counts, layout=None, seed: int = 0
               ) -> tuple[BetheRoots, float]:
    """``λ = -(2/σ)[Σ_k g_k(n↓+n↑) + 4 Σ_α 1/ω_{q,α}]``."""
    return solve_problem(p, root_counts, layout, seed)


def gap_certificate(L: int, sigma: float) -> float:
    if L <= 2:
        raise ValueError("the certificate needs L > 2")
    return 8.0 / (sigma * L) * math.sin(math.pi / L) ** 2


# enumeration ------------------------------------------------------------------

def su2q_root_bounds(q: int, L: int, pattern: ExcitationPattern) -> list[tuple[int, ...]]:
    """Root counts ``(M_1..M_{2q-1})`` whose highest weight is dominant and
    dominates the physical weight ``((L-1)^q, 1^q)`` (one particle per
    copy flavour, with the down flavours particle-hole transformed)."""
    r = 2 * q
    ms = [q] + [fundamental_level(q, u, d) for u, d in zip(pattern.n_up, pattern.n_down)]
    lam = np.array([sum(1 for m in ms if m >= i) for i in range(1, r + 1)], dtype=int)
    w = np.array([L - 1] * q + [1] * q, dtype=int)
    if lam.sum() != w.sum():
        return []
    caps = np.cumsum(lam - w)[: r - 1]
    if np.any(caps < 0):
        return []
    out = []
    for M in product(*[range(int(cp) + 1) for cp in caps]):
        Mx = np.concatenate([[0], M, [0]])
        lp = lam - Mx[1:] + Mx[:-1]
        if np.all(np.diff(lp) <= 0):
            out.append(tuple(int(x) for x in M))
    return out


def _layouts(n_gaps: int, M: int):
    for c in combinations_with_replacement(range(n_gaps), M):
        yield [c.count(i) for i in range(n_gaps)]


def _patterns(L: int, q: int, algebra: str, max_unpaired: int):
    if algebra == "su11":
        cap = q
    elif algebra == "su2":
        cap = 1
    else:
        cap = q
    opts = [(u, 0) for u in range(cap + 1)] + [(0, d) for d in range(1, cap + 1)]
    for occ in product(opts, repeat=L - 1):
        nu = tuple(o[0] for o in occ)
        nd = tuple(o[1] for o in occ)
        if sum(nu) != sum(nd) or sum(nu) + sum(nd) > max_unpaired:
            continue
        if algebra in ("su11", "su2") and sum(nu) > q:
            continue
        yield nu, nd


def enumerate_states(c: GaudinCouplings, q: int, algebra: str, max_unpaired: int = 4,
                     max_pairs: int = 2, all_layouts: bool = True, seed: int = 0):
    """Solve every admissible (pattern, root count, layout) up to the caps.

    Yields dicts with keys ``algebra, n_up, n_down, root_counts, layout,
    eigenvalue, residual, iterations`` (``eigenvalue`` is ``nan`` and
    ``error`` is set when the solver rejects a configuration).
    """
    if algebra not in ("su11", "su2", "su2q"):
        raise ValueError("algebra must be su11, su2 or su2q")
    for nu, nd in _patterns(c.L, q, algebra, max_unpaired):
        if algebra == "su2q":
            pat = ExcitationPattern(nu, nd, 0)
            p = build_su2q_problem(c, q, pat)
            counts_list = [M for M in su2q_root_bounds(q, c.L, pat) if sum(M) <= 2 * max_pairs
                           and M[q - 1] <= max_pairs]
        else:
            pat = ExcitationPattern.for_q(nu, nd, q)
            if algebra == "su11":
                p = su11_problem(c, pat)
                Mmax = pat.N
            else:
                p = su2_problem(c, pat)
                Z = int(np.sum(pat.n == 0))
                Mmax = min(pat.N, Z + 1 - pat.N)
            counts_list = [(M,) for M in range(0, min(Mmax, max_pairs) + 1)]
        n_gaps = len(np.unique(np.round(p.poles, 12))) - 1
        for M in counts_list:
            lq = M[p.eig_level]
            lays = list(_layouts(n_gaps, lq)) if all_layouts else [None]
            for lay in lays:
                layout = None
                if lay is not None:
                    layout = [None] * p.levels
                    layout[p.eig_level] = lay
                rec = dict(algebra=algebra, n_up=nu, n_down=nd, root_counts=tuple(M),
                           layout=None if lay is None else tuple(lay))
                try:
                    if algebra == "su11":
                        roots, lam = solve_su11(c, pat, M[0], layout=lay, seed=seed)
                    elif algebra == "su2":
                        roots, lam = solve_su2(c, pat, M[0], layout=lay, seed=seed)
                    else:
                        roots, lam = solve_su2q(p, M, layout=layout, seed=seed)
                    rec.update(eigenvalue=lam,
                               residual=float(np.abs(roots.residuals).max(initial=0.0)),
                               iterations=roots.iterations, roots=roots)
                except (BetheConvergenceError, np.linalg.LinAlgError) as e:
                    rec.update(eigenvalue=float("nan"), residual=float("nan"),
                               iterations=0, error=str(e))
                yield rec


def gap_search(c: GaudinCouplings, q: int, algebra: str = "su11", max_unpaired: int = 4,
               max_pairs: int = 2) -> tuple[float, list]:
    """Smallest non-zero ``|λ|`` over enumerated states, with flags when the
    minimum sits on the enumeration boundary."""
    best, arg, flags = float("inf"), None, []
    scale = 1.0 / c.sigma
    for rec in enumerate_states(c, q, algebra, max_unpaired, max_pairs, all_layouts=True):
        lam = rec["eigenvalue"]
        if np.isfinite(lam) and abs(lam) > 1e-10 * scale and abs(lam) < best:
            best, arg = abs(lam), rec
    if arg is not None:
        if sum(arg["n_up"]) + sum(arg["n_down"]) >= max_unpaired:
            flags.append("minimum at unpaired cap")
        if max(arg["root_counts"], default=0) >= max_pairs:
            flags.append("minimum at pair cap")
    return best, flags
