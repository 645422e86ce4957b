"""Random control pulses, driven propagators and Monte-Carlo ensembles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .algebra import expm
from .liouville import build_liouvillean, haar_projector
from .model import SystemSpec

_trapz = getattr(np, "trapezoid", None) or np.trapz


# pulse processes --------------------------------------------------------------

@dataclass(frozen=True)
class PulseProcess:
    """Law of the control signal ``g(t)``.

    ``kind="tones"`` gives ``g(t) = Σ_k A_k cos(ω_k t + φ_k)`` with uniform
    laws on the given ranges.  ``kind="piecewise"`` holds an independent
    uniform value on ``amplitude`` for intervals of length ``hold``, the
    white-noise limit as ``hold -> 0``.
    """

    K: int = 100
    amplitude: tuple = (-0.5, 0.5)
    frequency: tuple = (-5.0, 5.0)
    phase: tuple = (-5.0, 5.0)
    seed: int = 0
    kind: str = "tones"
    hold: float = 0.05

    def __post_init__(self):
        if self.kind not in ("tones", "piecewise"):
            raise ValueError("kind must be 'tones' or 'piecewise'")
        if self.kind == "tones" and self.K < 1:
            raise ValueError("K must be >= 1")
        if self.kind == "piecewise" and self.hold <= 0:
            raise ValueError("hold must be positive")

    @classmethod
    def chain_default(cls, L: int, seed: int = 0, K: int = 100) -> "PulseProcess":
        return cls(K=K, amplitude=(-0.5, 0.5), frequency=(-float(L), float(L)),
                   phase=(-float(L), float(L)), seed=seed)

    @classmethod
    def white(cls, sigma: float, hold: float, seed: int = 0) -> "PulseProcess":
        """Piecewise-independent process with ``σ = (a²/3)·hold``."""
        a = math.sqrt(3.0 * sigma / hold)
        return cls(K=1, amplitude=(-a, a), seed=seed, kind="piecewise", hold=hold)

    def _second_moment(self) -> float:
        lo, hi = self.amplitude
        return (lo * lo + lo * hi + hi * hi) / 3.0

    def correlation(self, s):
        """Closed-form ``E[g(t+s) g(t)]`` averaged over ``t`` (stationary part)."""
        s = np.abs(np.asarray(s, dtype=float))
        m2 = self._second_moment()
        if self.kind == "piecewise":
            return m2 * np.clip(1 - s / self.hold, 0, None)
        lo, hi = self.frequency
        with np.errstate(divide="ignore", invalid="ignore"):
            if hi > lo:
                mean_cos = np.where(s > 0, (np.sin(hi * s) - np.sin(lo * s)) / ((hi - lo) * s), 1.0)
            else:
                mean_cos = np.cos(lo * s)
        return 0.5 * self.K * m2 * mean_cos

    def sigma_eff(self) -> float:
        """``∫ c(s) ds`` over the real line, in closed form."""
        m2 = self._second_moment()
        if self.kind == "piecewise":
            return m2 * self.hold
        lo, hi = self.frequency
        if not (hi > lo and lo <= 0 <= hi):
            return 0.0 if hi > lo else float("inf")
        return math.pi * self.K * m2 / (hi - lo)

    def max_abs(self) -> float:
        """Upper bound on ``|g(t)|``."""
        a = max(abs(self.amplitude[0]), abs(self.amplitude[1]))
        return a if self.kind == "piecewise" else self.K * a


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index``; independent of batching."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(index)]))


@dataclass
class PulseBatch:
    """Parameters of ``n`` sampled pulses, evaluated together."""

    process: PulseProcess
    indices: np.ndarray
    A: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    rngs: list = field(default_factory=list)
    values: np.ndarray | None = None  # piecewise values, shape (n, J)

    @classmethod
    def draw(cls, p: PulseProcess, indices) -> "PulseBatch":
        indices = np.asarray(indices, dtype=np.int64)
        if p.kind == "tones":
            A, om, ph = [], [], []
            for i in indices:
                r = trajectory_rng(p.seed, i)
                A.append(r.uniform(*p.amplitude, p.K))
                om.append(r.uniform(*p.frequency, p.K))
                ph.append(r.uniform(*p.phase, p.K))
            return cls(p, indices, np.array(A), np.array(om), np.array(ph))
        rngs = [trajectory_rng(p.seed, i) for i in indices]
        return cls(p, indices, np.zeros((len(indices), 0)), np.zeros((len(indices), 0)),
                   np.zeros((len(indices), 0)), rngs, np.zeros((len(indices), 0)))

    def _ensure(self, J: int):
        have = self.values.shape[1]
        if J > have:
            extra = np.array([r.uniform(*self.process.amplitude, J - have) for r in self.rngs])
            self.values = np.hstack([self.values, extra.reshape(len(self.rngs), -1)])

    def __call__(self, t) -> np.ndarray:
        """``g`` for every pulse at times ``t``; shape ``(n,) + shape(t)``."""
        t = np.asarray(t, dtype=float)
        if self.process.kind == "tones":
            arg = self.omega[..., None] * t.reshape(1, 1, -1) + self.phi[..., None]
            out = np.einsum("nk,nkt->nt", self.A, np.cos(arg))
            return out.reshape((len(self.indices),) + t.shape)
        j = np.floor(t / self.process.hold).astype(int).reshape(-1)
        self._ensure(int(j.max(initial=-1)) + 1)
        return self.values[:, j].reshape((len(self.indices),) + t.shape)

    def midpoints(self, dt: float, n_steps: int, start: int = 0, chunk: int = 256):
        """Yield ``g((s + 1/2) dt)`` for ``s = start .. start+n_steps-1``,
        one array of shape ``(n,)`` per step."""
        if self.process.kind == "tones":
            # phasor recurrence, refreshed every ``chunk`` steps
            step = np.exp(1j * self.omega * dt)
            s = start
            end = start + n_steps
            while s < end:
                z = self.A * np.exp(1j * (self.omega * (s + 0.5) * dt + self.phi))
                for _ in range(min(chunk, end - s)):
                    yield z.real.sum(axis=1)
                    z *= step
                    s += 1
        else:
            for s in range(start, start + n_steps):
                yield self(np.array([(s + 0.5) * dt]))[:, 0]


class SinglePulse:
    """Callable ``g(t)`` of one sampled pulse."""

    def __init__(self, batch: PulseBatch):
        self.batch = batch

    def __call__(self, t):
        return self.batch(t)[0]


def sample_pulse(p: PulseProcess, index: int = 0) -> SinglePulse:
    """Pulse number ``index`` of the process; deterministic in ``(seed, index)``."""
    return SinglePulse(PulseBatch.draw(p, [index]))


# propagation --------------------------------------------------------------------

class StepExponential:
    """``g -> expm(-i dt (H + g V))`` on ``|g| ≤ G`` as a Chebyshev series.

    The map is entire in ``g``; the series is truncated at the roundoff floor of the sampled
    exponentials and is validated against direct exponentials.
    """

    def __init__(self, H, V, dt: float, G: float, max_terms: int = 64):
        H = np.asarray(H, complex)
        V = np.asarray(V, complex)
        self.d = H.shape[0]
        self.G = max(float(G), 1e-12)
        for M in (16, 32, max_terms):
            x = np.cos(np.pi * (np.arange(M) + 0.5) / M)
            E = np.array([expm(-1j * dt * (H + self.G * xi * V)) for xi in x])
            T = np.cos(np.outer(np.arange(M), np.arccos(x)))  # (m, node)
            C = (2.0 / M) * np.einsum("mj,jab->mab", T, E)
            C[0] *= 0.5
            mags = np.abs(C).reshape(M, -1).max(axis=1)
            if mags[M // 2:].max() < 1e-14:
                keep = np.flatnonzero(mags > 1e-14)
                C = C[: max(int(keep[-1]) + 1 if keep.size else 1, 2)]
                break
        self.coef = C.reshape(len(C), -1)
        test = self.G * np.array([-1.0, -0.37, 0.0, 0.61, 1.0])
        err = np.abs(self(test) - np.array([expm(-1j * dt * (H + g * V)) for g in test])).max()
        if err > 1e-12:
            raise ValueError(f"Chebyshev step exponential inaccurate ({err:.2e})")

    def __call__(self, g: np.ndarray) -> np.ndarray:
        x = np.asarray(g, dtype=float) / self.G
        if np.abs(x).max(initial=0) > 1 + 1e-12:
            raise ValueError("g outside the interpolation range")
        M = self.coef.shape[0]
        T = np.empty((x.size, M))
        T[:, 0] = 1.0
        if M > 1:
            T[:, 1] = x
        for m in range(2, M):
            T[:, m] = 2 * x * T[:, m - 1] - T[:, m - 2]
        return (T @ self.coef).reshape(x.size, self.d, self.d)


def step_bound(sys: SystemSpec, gmax: float) -> float:
    """Largest admissible time step ``0.1 / (‖H‖ + max|g| ‖V‖)``."""
    return 0.1 / (np.linalg.norm(sys.H, 2) + gmax * np.linalg.norm(sys.V, 2))


def _unitarity(U: np.ndarray) -> float:
    d = U.shape[-1]
    return float(np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - np.eye(d)).max())


def propagate_batch(sys: SystemSpec, batch: PulseBatch, checkpoints, dt: float,
                    record_g: bool = False):
    """Midpoint exponential propagation of every pulse in ``batch``.

    Returns ``(Us, g_path)`` with ``Us[c]`` of shape ``(n, d, d)`` at each
    checkpoint time (rounded to the step grid) and ``g_path`` the midpoint
    values when ``record_g`` is set.
    """
    checkpoints = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    steps = np.rint(checkpoints / dt).astype(int)
    if np.any(np.abs(steps * dt - checkpoints) > 1e-9 * max(1.0, checkpoints.max())):
        raise ValueError("checkpoints must be multiples of dt")
    n = len(batch.indices)
    d = sys.dim
    total = int(steps.max(initial=0))
    gmax = 0.0
    if total:
        gpath = np.empty((total, n)) if record_g else None
        if batch.process.kind == "tones":
            G = float(np.abs(batch.A).sum(axis=1).max())
        else:
            G = batch.process.max_abs()
        stepper = StepExponential(sys.H, sys.V, dt, G)
    U = np.broadcast_to(np.eye(d, dtype=complex), (n, d, d)).copy()
    out = [None] * len(steps)
    for c, s in enumerate(steps):
        if s == 0:
            out[c] = U.copy()
    s = 0
    for g in (batch.midpoints(dt, total) if total else []):
        gmax = max(gmax, float(np.abs(g).max()))
        if record_g:
            gpath[s] = g
        U = stepper(g) @ U
        s += 1
        for c in np.flatnonzero(steps == s):
            out[c] = U.copy()
    if total:
        if dt > step_bound(sys, gmax) * (1 + 1e-12):
            raise ValueError(f"dt={dt} violates dt <= 0.1/(‖H‖+max|g|‖V‖) = "
                             f"{step_bound(sys, gmax):.4g}")
        drift = _unitarity(U)
        if drift > 1e-6:
            raise FloatingPointError(f"unitarity drift {drift:.2e}; use a smaller dt")
    return out, (gpath if total and record_g else None)


def admissible_dt(sys: SystemSpec, p: PulseProcess, n_samples: int, checkpoints,
                  first_index: int = 0) -> float:
    """Step size meeting the precondition for every trajectory and landing on
    all ``checkpoints``; uses the rigorous bound ``max|g| ≤ Σ_k |A_k|``."""
    if p.kind == "tones":
        idx = np.arange(first_index, first_index + n_samples)
        G = max(float(np.abs(PulseBatch.draw(p, idx[k:k + 4096]).A).sum(axis=1).max())
                for k in range(0, n_samples, 4096))
    else:
        G = p.max_abs()
    dmax = step_bound(sys, G)
    cps = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    cps = cps[cps > 0]
    if cps.size == 0:
        return dmax
    base = cps.min()
    n = int(math.ceil(base / dmax))
    while n < 10**8:
        dt = base / n
        r = cps / dt
        if np.all(np.abs(r - np.rint(r)) < 1e-9 * r.max()):
            return dt
        n += 1
    raise ValueError("checkpoints are not commensurate")


@dataclass
class Trajectory:
    times: np.ndarray
    g_values: np.ndarray
    U: np.ndarray
    unitarity_drift: float = 0.0


def propagate(sys: SystemSpec, g, T: float, dt: float) -> Trajectory:
    """``U(T)`` for a callable pulse ``g`` with steps
    ``U <- expm(-i dt (H + g(t + dt/2) V)) U``."""
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt")
    times = (np.arange(n) + 0.5) * dt
    gv = np.asarray(g(times), dtype=float).reshape(-1) if n else np.zeros(0)
    gmax = float(np.abs(gv).max(initial=0.0))
    if n and dt > step_bound(sys, gmax) * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates dt <= 0.1/(‖H‖+max|g|‖V‖) = "
                         f"{step_bound(sys, gmax):.4g}")
    d = sys.dim
    U = np.eye(d, dtype=complex)
    drift = 0.0
    if n:
        stepper = StepExponential(sys.H, sys.V, dt, gmax)
        for k0 in range(0, n, 1024):
            for E in stepper(gv[k0:k0 + 1024]):
                U = E @ U
            drift = max(drift, _unitarity(U))
    if drift > 1e-6:
        raise FloatingPointError(f"unitarity drift {drift:.2e}; use a smaller dt")
    return Trajectory(times, gv, U, drift)


# ensembles -----------------------------------------------------------------------

def qq_tensor(U: np.ndarray, q: int) -> np.ndarray:
    """``U^{⊗q} ⊗ conj(U)^{⊗q}`` (batched over leading axes)."""
    def kpow(X):
        out = X
        for _ in range(q - 1):
            out = np.einsum("...ij,...kl->...ikjl", out, X).reshape(
                X.shape[:-2] + (out.shape[-2] * X.shape[-2], out.shape[-1] * X.shape[-1]))
        return out
    Uq = kpow(U)
    n = Uq.shape[-1]
    return np.einsum("...ij,...kl->...ikjl", Uq, Uq.conj()).reshape(U.shape[:-2] + (n * n, n * n))


@dataclass
class Ensemble:
    """Empirical ``E[U^{⊗q,q}]`` with jackknife errors.

    ``standard_error`` is the jackknife error of the leading singular value;
    ``noise_norm`` is the jackknife spread measured in the 2->2 norm.
    """

    n_samples: int
    q: int
    channel_estimate: np.ndarray
    standard_error: float
    noise_norm: float
    batch_means: np.ndarray | None = None


def _jackknife(batch_means: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, float, float]:
    B = len(batch_means)
    total = np.tensordot(weights, batch_means, axes=1) / weights.sum()
    if B < 2:
        return total, float("nan"), float("nan")
    loo = [(total * weights.sum() - weights[b] * batch_means[b]) / (weights.sum() - weights[b])
           for b in range(B)]
    s_loo = np.array([np.linalg.norm(x, 2) for x in loo])
    se_sv = math.sqrt((B - 1) / B * np.sum((s_loo - s_loo.mean()) ** 2))
    noise = math.sqrt((B - 1) / B * sum(np.linalg.norm(x - total, 2) ** 2 for x in loo))
    return total, se_sv, noise


def ensemble_from_unitaries(Us: np.ndarray, q: int, n_batches: int = 20) -> Ensemble:
    n = Us.shape[0]
    B = max(1, min(n_batches, n))
    edges = np.linspace(0, n, B + 1).astype(int)
    means, w = [], []
    for b in range(B):
        sl = Us[edges[b]:edges[b + 1]]
        acc = 0
        for k in range(0, len(sl), 512):
            acc = acc + qq_tensor(sl[k:k + 512], q).sum(axis=0)
        means.append(acc / len(sl))
        w.append(len(sl))
    total, se, noise = _jackknife(np.array(means), np.array(w, dtype=float))
    return Ensemble(n, q, total, se, noise, np.array(means))


def write_channel_blob(path, M: np.ndarray) -> None:
    """Little-endian binary: ``int64`` rows and columns, then row-major
    ``(re, im)`` pairs of ``float64``."""
    M = np.ascontiguousarray(M, dtype=complex)
    with open(path, "wb") as f:
        f.write(np.array(M.shape, dtype="<i8").tobytes())
        f.write(M.astype("<c16").tobytes())


def read_channel_blob(path) -> np.ndarray:
    with open(path, "rb") as f:
        shape = tuple(int(x) for x in np.frombuffer(f.read(16), dtype="<i8"))
        data = np.frombuffer(f.read(), dtype="<c16")
    if data.size != shape[0] * shape[1]:
        raise ValueError("blob size does not match its header")
    return data.reshape(shape).astype(complex)


def run_unitaries(sys: SystemSpec, p: PulseProcess, checkpoints, dt: float, n_samples: int,
                  chunk: int = 1024, record_g: bool = False, first_index: int = 0):
    """Propagate ``n_samples`` pulses in chunks; returns per-checkpoint arrays of
    unitaries and optionally the midpoint pulse values."""
    outs, gs = None, []
    for c0 in range(0, n_samples, chunk):
        idx = np.arange(first_index + c0, first_index + min(c0 + chunk, n_samples))
        Us, gp = propagate_batch(sys, PulseBatch.draw(p, idx), checkpoints, dt, record_g)
        outs = [[u] for u in Us] if outs is None else [o + [u] for o, u in zip(outs, Us)]
        if record_g:
            gs.append(gp)
    Uall = [np.concatenate(o) for o in outs]
    return Uall, (np.concatenate(gs, axis=1) if record_g and gs else None)


def ensemble_average(sys: SystemSpec, p: PulseProcess, q: int, T: float, dt: float | None,
                     n_samples: int, n_batches: int = 20) -> Ensemble:
    if dt is None:
        dt = admissible_dt(sys, p, n_samples, [T])
    Us, _ = run_unitaries(sys, p, [T], dt, n_samples)
    return ensemble_from_unitaries(Us[0], q, n_batches)


def empirical_correlation(g_path: np.ndarray, dt: float, max_lag: int | None = None):
    """Time- and ensemble-averaged ``E[g(t+s) g(t)]`` on the step grid.

    ``g_path`` has shape ``(steps, samples)``.
    """
    S = g_path.shape[0]
    max_lag = S - 1 if max_lag is None else min(max_lag, S - 1)
    nfft = 1 << int(math.ceil(math.log2(2 * S)))
    F = np.fft.rfft(g_path, n=nfft, axis=0)
    ac = np.fft.irfft(np.abs(F) ** 2, n=nfft, axis=0)[: max_lag + 1].mean(axis=1)
    ac /= (S - np.arange(max_lag + 1))
    return np.arange(max_lag + 1) * dt, ac


def sigma_from_correlation(lags: np.ndarray, c: np.ndarray) -> float:
    """``2 ∫_0^{s0} c(s) ds`` up to the first zero crossing ``s0``."""
    neg = np.flatnonzero(c <= 0)
    end = int(neg[0]) if neg.size else len(c) - 1
    if neg.size and end > 0:
        # include the linear piece down to the crossing
        s0 = lags[end - 1] + c[end - 1] / (c[end - 1] - c[end]) * (lags[end] - lags[end - 1])
        x = np.concatenate([lags[:end], [s0]])
        y = np.concatenate([c[:end], [0.0]])
    else:
        x, y = lags[: end + 1], c[: end + 1]
    return float(2 * _trapz(y, x))


@dataclass
class MarkovReport:
    sigma_eff: float
    sigma_closed_form: float
    rows: list  # (T, discrepancy, noise_norm, ratio)


def markov_check(sys: SystemSpec, p: PulseProcess, q: int, T_grid, n_samples: int,
                 dt: float | None = None, n_batches: int = 20,
                 corr_samples: int = 512) -> MarkovReport:
    """Compare the empirical channel with ``expm(T L_q(σ_eff))`` along ``T_grid``.

    ``σ_eff`` comes from the empirical autocovariance of the sampled pulses
    of the first ``corr_samples`` trajectories.
    """
    T_grid = np.sort(np.asarray(T_grid, dtype=float))
    if dt is None:
        dt = admissible_dt(sys, p, n_samples, T_grid)
    Us, gp = run_unitaries(sys, p, T_grid, dt, n_samples, record_g=True)
    k = min(corr_samples, gp.shape[1])
    lags, c = empirical_correlation(gp[:, :k], dt, max_lag=min(gp.shape[0] - 1, 20000))
    sig = sigma_from_correlation(lags, c)
    Lq = build_liouvillean(sys.with_sigma(sig), q)
    rows = []
    for T, U in zip(T_grid, Us):
        ens = ensemble_from_unitaries(U, q, n_batches)
        ref = expm(T * Lq.matrix)
        disc = float(np.linalg.norm(ens.channel_estimate - ref, 2))
        rows.append((float(T), disc, ens.noise_norm, disc / ens.noise_norm if ens.noise_norm else float("inf")))
    return MarkovReport(sig, p.sigma_eff(), rows)


# Haar reference and angles ------------------------------------------------------------

def haar_sample(d: int, rng: np.random.Generator | int | None = None, n: int | None = None) -> np.ndarray:
    """Haar unitary (or ``n`` of them) via QR of a complex Ginibre matrix with
    the phases of ``diag(R)`` removed."""
    rng = np.random.default_rng(rng)
    shape = (d, d) if n is None else (n, d, d)
    Z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diagonal(R, axis1=-2, axis2=-1)
    ph = ph / np.abs(ph)
    return Q * ph[..., None, :]


def _reflector(v: np.ndarray) -> np.ndarray:
    """Unitary ``R`` with ``R v = e_1`` for unit vectors ``v`` (batched)."""
    m = v.shape[-1]
    th = np.angle(v[..., 0])
    u = v * np.exp(-1j * th)[..., None]
    w = u.copy()
    w[..., 0] -= 1.0
    nw = np.sum(np.abs(w) ** 2, axis=-1)
    eye = np.eye(m, dtype=complex)
    safe = np.where(nw > 1e-30, nw, 1.0)
    Hh = eye - 2 * np.einsum("...i,...j->...ij", w, w.conj()) / safe[..., None, None]
    Hh = np.where((nw > 1e-30)[..., None, None], Hh, eye)
    return Hh * np.exp(-1j * th)[..., None, None]


def _wrap(theta: np.ndarray) -> np.ndarray:
    return np.mod(theta, 2 * np.pi)


def angle_decompose(U: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Map a unitary to ``d²`` coordinates that are i.i.d. uniform on
    ``[0, 2π)`` under the Haar measure.

    Columns are peeled recursively.  For the first column ``v`` of the
    current ``m x m`` block the coordinates are the ``m`` phases
    ``arg v_j`` and ``m-1`` stick-breaking fractions of ``|v_j|²`` (taken
    from the last entry upwards), each mapped through its Beta(1, r) CDF
    ``1 - (1-x)^r`` and scaled by ``2π``.  A reflection sends ``v`` to
    ``e_1`` and the remaining ``(m-1)``-block is processed the same way.
    Accepts a single matrix or a stack.
    """
    U = np.asarray(U, dtype=complex)
    single = U.ndim == 2
    if single:
        U = U[None]
    if _unitarity(U) > tol:
        raise ValueError("input is not unitary")
    n, d, _ = U.shape
    coords = []
    W = U
    for m in range(d, 0, -1):
        v = W[:, :, 0]
        coords.append(_wrap(np.angle(v)))
        p = np.abs(v) ** 2
        rest = np.ones(n)
        fr = []
        for j in range(m - 1, 0, -1):  # entries m-1 .. 1 (0-based), last first
            x = np.where(rest > 1e-300, p[:, j] / np.where(rest > 1e-300, rest, 1.0), 0.0)
            x = np.clip(x, 0.0, 1.0)
            fr.append(2 * np.pi * (1 - (1 - x) ** j))  # Beta(1, j) CDF
            rest = rest - p[:, j]
        if fr:
            coords.append(np.stack(fr, axis=1))
        if m > 1:
            R = _reflector(v)
            W = (R @ W)[:, 1:, 1:]
    out = np.concatenate(coords, axis=1)
    out = np.minimum(out, np.nextafter(2 * np.pi, 0))
    return out[0] if single else out


def angle_compose(theta: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`angle_decompose`."""
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    if single:
        theta = theta[None]
    n = theta.shape[0]
    pos = 0
    blocks = []
    for m in range(d, 0, -1):
        ph = theta[:, pos:pos + m]
        pos += m
        fr = theta[:, pos:pos + m - 1]
        pos += m - 1
        p = np.zeros((n, m))
        rest = np.ones(n)
        for idx, j in enumerate(range(m - 1, 0, -1)):
            F = fr[:, idx] / (2 * np.pi)
            x = 1 - (1 - F) ** (1.0 / j)
            p[:, j] = x * rest
            rest = rest - p[:, j]
        p[:, 0] = np.clip(rest, 0, None)
        v = np.sqrt(p) * np.exp(1j * ph)
        blocks.append(v)
    W = np.ones((n, 1, 1), dtype=complex) * blocks[-1][:, :, None]
    for v in reversed(blocks[:-1]):
        m = v.shape[1]
        R = _reflector(v)
        D = np.zeros((n, m, m), dtype=complex)
        D[:, 0, 0] = 1.0
        D[:, 1:, 1:] = W
        W = np.conj(np.swapaxes(R, -1, -2)) @ D
    return W[0] if single else W


def uniformity_histogram(samples: np.ndarray, bins: int = 25) -> tuple[np.ndarray, float, float]:
    """Per-coordinate counts on ``[0, 2π)`` and the pooled chi-square
    statistic against a flat multinomial with its p-value."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 100:
        raise ValueError("need at least 100 samples of angle vectors")
    n, m = samples.shape
    idx = np.clip(np.floor(samples / (2 * np.pi) * bins).astype(int), 0, bins - 1)
    counts = np.zeros((m, bins), dtype=np.int64)
    for i in range(m):
        counts[i] = np.bincount(idx[:, i], minlength=bins)
    expected = n / bins
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    pval = float(stats.chi2.sf(chi2, m * (bins - 1)))
    return counts, chi2, pval


def expander_distance_mc(ens: Ensemble, d: int) -> tuple[float, float]:
    """``‖E_est - U∞‖`` together with the 2-norm sampling error."""
    P = haar_projector(d, ens.q)
    if P.projector is None:
        raise ValueError("dense Haar projector required")
    return float(np.linalg.norm(ens.channel_estimate - P.projector, 2)), ens.noise_norm
