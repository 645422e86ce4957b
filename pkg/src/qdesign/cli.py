"""Command-line orchestration: configs, subcommands, CSV and manifest output."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import DEFAULT_POLICY, DenseCapError, NumericPolicy, eig_biorthonormal, vec
from .bethe import BetheConvergenceError
from .model import ChainSpec, SystemSpec, chain_system, counterexample_system, pauli_sum

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; ``path`` points at the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


class NumericalFailure(RuntimeError):
    pass


# config -------------------------------------------------------------------------

def load_config(path: str | os.PathLike) -> dict:
    text = Path(path).read_text()
    suffix = Path(path).suffix.lower()
    try:
        if suffix == ".json":
            cfg = json.loads(text)
        else:
            import yaml
            cfg = yaml.safe_load(text)
    except Exception as e:  # parse errors are config errors
        raise ConfigError("<file>", f"cannot parse: {e}") from e
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "top level must be a mapping")
    return cfg


def _check_finite(node, path="") -> None:
    if isinstance(node, bool) or node is None or isinstance(node, str):
        return
    if isinstance(node, (int, float)):
        if not math.isfinite(node):
            raise ConfigError(path or "<root>", "numeric fields must be finite")
        return
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, f"{path}.{k}" if path else str(k))
        return
    if isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _check_finite(v, f"{path}[{i}]")
        return
    raise ConfigError(path, f"unsupported value type {type(node).__name__}")


def canonical(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def _matrix(x, path):
    if isinstance(x, dict) and "pauli" in x:
        try:
            return pauli_sum([(complex(c), str(w)) for c, w in x["pauli"]])
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(path, f"bad Pauli sum: {e}") from e
    if isinstance(x, dict) and "re" in x:
        re_ = np.asarray(x["re"], dtype=float)
        im = np.asarray(x.get("im", np.zeros_like(re_)), dtype=float)
        M = re_ + 1j * im
    else:
        try:
            M = np.asarray(x, dtype=complex)
        except (TypeError, ValueError) as e:
            raise ConfigError(path, "matrix entries must be numbers") from e
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(path, "matrix must be square")
    return M


def system_from_config(cfg: dict, sigma: float = 0.0) -> tuple[SystemSpec, ChainSpec | None]:
    block = cfg.get("system")
    if not isinstance(block, dict):
        raise ConfigError("system", "missing system block")
    sources = [k for k in ("chain", "matrices", "counterexample") if k in block]
    if len(sources) != 1:
        raise ConfigError("system", "exactly one of chain, matrices, counterexample is required")
    src = sources[0]
    b = block[src] or {}
    try:
        if src == "chain":
            spec = ChainSpec(int(b.get("L", 0)), int(b.get("c", 1)))
            return chain_system(spec, sigma), spec
        if src == "matrices":
            H = _matrix(b.get("H"), "system.matrices.H")
            V = _matrix(b.get("V"), "system.matrices.V")
            return SystemSpec(H, V, sigma), None
        return counterexample_system(float(b.get("eps", 0.1)), sigma), None
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"system.{src}", str(e)) from e


def _grid(cfg: dict, key: str, single: str | None = None, default=None) -> list[float]:
    if key in cfg:
        g = cfg[key]
        if isinstance(g, dict):
            if "log" in g:
                lo, hi, n = g["log"]
                return list(np.geomspace(float(lo), float(hi), int(n)))
            if "linear" in g:
                lo, hi, n = g["linear"]
                return list(np.linspace(float(lo), float(hi), int(n)))
            raise ConfigError(key, "grid needs 'log' or 'linear' = [lo, hi, n]")
        if isinstance(g, (list, tuple)):
            return [float(x) for x in g]
        return [float(g)]
    if single and single in cfg:
        return [float(cfg[single])]
    if default is None:
        raise ConfigError(key, "required")
    return list(default)


def _int_list(cfg: dict, key: str, default) -> list[int]:
    v = cfg.get(key, default)
    if isinstance(v, dict) and "range" in v:
        lo, hi = v["range"]
        return list(range(int(lo), int(hi) + 1))
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(v)]


def policy_from_config(cfg: dict, deterministic: bool) -> NumericPolicy:
    block = cfg.get("policy", {}) or {}
    fields = set(NumericPolicy.__dataclass_fields__)
    bad = [k for k in block if k not in fields]
    if bad:
        raise ConfigError(f"policy.{bad[0]}", "unknown policy field")
    return DEFAULT_POLICY.with_(**block, deterministic=deterministic or block.get("deterministic", False))


# output -------------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (tuple, list)):
        return " ".join(fmt(v) for v in x)
    return "" if x is None else str(x)


def write_csv(path: Path, header: list[str], rows) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
            n += 1
    return n


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: dict, outputs: dict, seeds: dict,
                   started: float, deterministic: bool) -> Path:
    man = dict(
        schema_version=SCHEMA_VERSION,
        command=command,
        code_version=__version__,
        config_hash=config_hash(cfg),
        config=cfg,
        deterministic=deterministic,
        started=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        finished=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        seeds=seeds,
        outputs=[dict(path=p.name, sha256=_sha(p), rows=n) for p, n in outputs.items()],
    )
    path = out / f"{command}_manifest.json"
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path


def _pool_map(fn, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, tasks))  # ordered by task id


# subcommands -------------------------------------------------------------------------

def _gap_task(task):
    from .effective import weak_gap_formula
    from .liouville import build_liouvillean
    from .spectral import spectral_gap, strong_gap_formula
    (H, V), L, c, sigma, q, is_chain, policy = task
    Lq = build_liouvillean(SystemSpec(H, V, sigma), q, policy)
    rep = spectral_gap(Lq, with_kappa=Lq.dim <= 1024, policy=policy)
    weak = weak_gap_formula(L, sigma) if is_chain else float("nan")
    strong = strong_gap_formula(L, sigma) if is_chain and L > 2 else float("nan")
    return (L, c, sigma, q, rep.lambda_star, rep.steady_dim, rep.kappa, weak, strong)


GAP_COLUMNS = ["L", "c", "sigma", "q", "lambda_star", "steady_dim", "kappa",
               "weak_prediction", "strong_prediction"]


def cmd_gap(cfg, policy, out: Path, threads: int):
    base, chain = system_from_config(cfg)
    sigmas = _grid(cfg, "sigma_grid", "sigma")
    qs = _int_list(cfg, "q", 1)
    systems = []
    if chain is not None:
        for L in _int_list(cfg, "L_grid", chain.L):
            c = min(chain.c, L)
            systems.append((L, c, chain_system(ChainSpec(L, c)), True))
    else:
        systems.append((base.dim, 0, base, False))
    tasks = [((np.array(s.H), np.array(s.V)), L, c, sg, q, ch, policy)
             for (L, c, s, ch) in systems for q in qs for sg in sigmas]
    rows = _pool_map(_gap_task, tasks, threads)
    path = out / "gap.csv"
    n = write_csv(path, GAP_COLUMNS, rows)
    return {path: n}, {}


def _bethe_record(rec: dict, idx: int, cross_check: bool):
    from .bethe import (BetheConvergenceError, ExcitationPattern, GaudinCouplings,
                        build_su2q_problem, enumerate_states, gap_certificate, solve_su11,
                        solve_su2, solve_su2q)
    from .effective import strong_chain_rwa_spectrum
    kind = rec.get("kind", "state")
    L = int(rec.get("L", 0))
    q = int(rec.get("q", 1))
    sigma = float(rec.get("sigma", 1.0))
    algebra = rec.get("algebra", "su11")
    sector = {"su11": "symmetric", "su2": "antisymmetric", "su2q": "full"}.get(algebra)
    base = dict(record=idx, kind=kind, L=L, q=q, sigma=sigma, algebra=algebra)
    rows = []

    def oracle(lam, sect):
        if not cross_check or L > 4 or not np.isfinite(lam):
            return float("nan")
        ev = strong_chain_rwa_spectrum(L, q, sigma, sect)
        return float(np.abs(ev - lam).min())

    try:
        if kind == "gap":
            lam = -gap_certificate(L, sigma)
            dist = float("nan")
            if cross_check and L <= 4:
                ev = strong_chain_rwa_spectrum(L, 1, sigma, "full")
                nz = np.abs(ev[np.abs(ev) > 1e-9 / sigma])
                dist = float(abs(nz.min() + lam))
            rows.append({**base, "eigenvalue": lam, "residual": 0.0, "status": "ok", "oracle_distance": dist})
        elif kind == "steady":
            c = GaudinCouplings.chain(L, sigma)
            pat = ExcitationPattern.for_q([0] * (L - 1), [0] * (L - 1), 1)
            roots, lam = solve_su11(c, pat, 0)
            rows.append({**base, "eigenvalue": lam, "residual": 0.0, "status": "ok",
                         "oracle_distance": oracle(lam, "symmetric")})
        elif kind == "state":
            c = GaudinCouplings.chain(L, sigma)
            nu = list(rec.get("n_up", [0] * (L - 1)))
            nd = list(rec.get("n_down", [0] * (L - 1)))
            counts = rec.get("root_counts")
            layout = rec.get("layout")
            if algebra == "su2q":
                p = build_su2q_problem(c, q, ExcitationPattern(nu, nd, 0))
                lay = None
                if layout is not None:
                    lay = [None] * p.levels
                    lay[p.eig_level] = list(layout)
                roots, lam = solve_su2q(p, list(counts), layout=lay, seed=int(rec.get("seed", 0)))
            else:
                pat = ExcitationPattern.for_q(nu, nd, q)
                M = None if counts is None else int(counts[0])
                solver = solve_su11 if algebra == "su11" else solve_su2
                roots, lam = solver(c, pat, M, layout=layout, seed=int(rec.get("seed", 0)))
            rows.append({**base, "n_up": nu, "n_down": nd, "root_counts": counts,
                         "layout": layout, "eigenvalue": lam,
                         "residual": float(np.abs(roots.residuals).max(initial=0.0)),
                         "status": "ok", "oracle_distance": oracle(lam, sector)})
        elif kind == "enumerate":
            c = GaudinCouplings.chain(L, sigma)
            for r in enumerate_states(c, q, algebra, int(rec.get("max_unpaired", 4)),
                                      int(rec.get("max_pairs", 2))):
                ok = np.isfinite(r["eigenvalue"])
                rows.append({**base, "n_up": r["n_up"], "n_down": r["n_down"],
                             "root_counts": r["root_counts"], "layout": r["layout"],
                             "eigenvalue": r["eigenvalue"], "residual": r["residual"],
                             "status": "ok" if ok else "failed: " + r.get("error", ""),
                             "oracle_distance": oracle(r["eigenvalue"], sector)})
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    except (BetheConvergenceError, np.linalg.LinAlgError, ValueError) as e:
        rows.append({**base, "eigenvalue": float("nan"), "residual": float("nan"),
                     "status": f"failed: {e}", "oracle_distance": float("nan")})
    return rows


BETHE_COLUMNS = ["record", "kind", "L", "q", "sigma", "algebra", "n_up", "n_down",
                 "root_counts", "layout", "eigenvalue", "residual", "status", "oracle_distance"]


def cmd_bethe(cfg, policy, out: Path, threads: int):
    block = cfg.get("bethe")
    if not isinstance(block, dict) or not isinstance(block.get("records"), list):
        raise ConfigError("bethe.records", "a list of records is required")
    cross = bool(block.get("cross_check", True))
    for i, r in enumerate(block["records"]):
        if not isinstance(r, dict) or "L" not in r:
            raise ConfigError(f"bethe.records[{i}]", "each record needs at least L")
    results = _pool_map(_bethe_star, [(r, i, cross) for i, r in enumerate(block["records"])], threads)
    rows = [[row.get(k) for k in BETHE_COLUMNS] for rs in results for row in rs]
    path = out / "bethe.csv"
    n = write_csv(path, BETHE_COLUMNS, rows)
    return {path: n}, {}


def _bethe_star(args):
    return _bethe_record(*args)


def cmd_mixing(cfg, policy, out: Path, threads: int):
    from .liouville import build_liouvillean
    from .spectral import singular_gap, spectral_gap
    base, chain = system_from_config(cfg)
    sigmas = _grid(cfg, "sigma_grid", "sigma")
    qs = _int_list(cfg, "q", 1)
    fr = _grid(cfg, "t_grid", None, np.linspace(0, 2, 41))  # in units of 1/λ*
    rows = []
    for q in qs:
        for sg in sigmas:
            Lq = build_liouvillean(base.with_sigma(sg), q, policy)
            rep = spectral_gap(Lq, with_kappa=False, policy=policy)
            for f in fr:
                t = f / rep.lambda_star
                if t <= 0:
                    rows.append((base.dim, sg, q, 0.0, 0.0, rep.lambda_star, float("nan"), 1.0))
                    continue
                s_star, delta = singular_gap(Lq, t, rep, policy)
                rows.append((base.dim, sg, q, t, f, rep.lambda_star, delta, s_star))
    path = out / "mixing.csv"
    n = write_csv(path, ["d", "sigma", "q", "t", "t_lambda", "lambda_star", "delta", "s_star"], rows)
    return {path: n}, {}


def cmd_sample(cfg, policy, out: Path, threads: int):
    from .stochastic import (PulseProcess, admissible_dt, angle_decompose,
                             ensemble_from_unitaries, run_unitaries, uniformity_histogram,
                             write_channel_blob)
    if "seed" not in cfg:
        raise ConfigError("seed", "a seed is mandatory for stochastic runs")
    seed = int(cfg["seed"])
    base, chain = system_from_config(cfg)
    pb = cfg.get("pulse", {}) or {}
    L = base.dim
    try:
        p = PulseProcess(K=int(pb.get("K", 100)),
                         amplitude=tuple(pb.get("amplitude", (-0.5, 0.5))),
                         frequency=tuple(pb.get("frequency", (-L, L))),
                         phase=tuple(pb.get("phase", (-L, L))),
                         seed=seed, kind=pb.get("kind", "tones"),
                         hold=float(pb.get("hold", 0.05)))
    except (ValueError, TypeError) as e:
        raise ConfigError("pulse", str(e)) from e
    n = int(cfg.get("n_samples", 10000))
    times = _grid(cfg, "times", "T")
    bins = int(cfg.get("bins", 25))
    if n < 100:
        raise ConfigError("n_samples", "at least 100 samples are needed for histograms")
    dt = float(cfg["dt"]) if "dt" in cfg else admissible_dt(base, p, n, times)
    Us, _ = run_unitaries(base, p, times, dt, n)
    channel_q = cfg.get("channel_q")
    if channel_q is not None and (int(channel_q) < 1
                                  or base.dim ** (2 * int(channel_q)) > policy.dense_cap):
        raise ConfigError("channel_q", "needs q >= 1 and d^(2q) within the dense cap")
    hist_rows, summary, blobs = [], [], {}
    for k, (t, U) in enumerate(zip(times, Us)):
        if channel_q is not None:
            ens = ensemble_from_unitaries(U, int(channel_q))
            b = out / f"sample_channel_t{k}.bin"
            write_channel_blob(b, ens.channel_estimate)
            blobs[b] = ens.channel_estimate.shape[0]
        counts, chi2, pval = uniformity_histogram(angle_decompose(U), bins)
        for i in range(counts.shape[0]):
            for j in range(bins):
                hist_rows.append((t, i, j, counts[i, j]))
        summary.append((t, n, chi2, counts.shape[0] * (bins - 1), pval, dt))
    h = out / "sample_histogram.csv"
    s = out / "sample_summary.csv"
    outputs = {h: write_csv(h, ["t", "coordinate", "bin", "count"], hist_rows),
               s: write_csv(s, ["t", "n_samples", "chi2", "dof", "p_value", "dt"], summary)}
    outputs.update(blobs)
    return outputs, {"trajectories": {"seed": seed, "first_index": 0, "count": n}}


def cmd_control_time(cfg, policy, out: Path, threads: int):
    from .applications import CONTROL_TIME_COMPARISON
    Ls = _int_list(cfg, "L_grid", [8, 10, 12, 14])
    sigmas = _grid(cfg, "sigma_grid", "sigma", np.geomspace(0.5, 10, 25))
    tasks = [(L, s) for L in Ls for s in sigmas]
    gaps = _pool_map(_chain_gap_star, tasks, threads)
    grid_rows = [(L, s, 1.0 / g) for (L, s), g in zip(tasks, gaps)]
    summary = []
    for L in Ls:
        sub = [r for r in grid_rows if r[0] == L]
        best = min(sub, key=lambda r: r[2])
        summary.append((L, best[1], best[2], best[2] / L ** 3, CONTROL_TIME_COMPARISON))
    g = out / "control_time.csv"
    s = out / "control_time_summary.csv"
    outputs = {g: write_csv(g, ["L", "sigma", "t_star"], grid_rows),
               s: write_csv(s, ["L", "sigma_argmin", "t_star_min", "t_star_over_L3",
                                "comparison_constant"], summary)}
    return outputs, {}


def _chain_gap_star(args):
    from .spectral import chain_gap
    return chain_gap(*args)


# invariant suite --------------------------------------------------------------------

def run_checks(policy: NumericPolicy = DEFAULT_POLICY, seed: int = 0) -> list[tuple]:
    """Rows ``(check, case, value, tolerance, passed)``."""
    from .applications import permanent, permanent_naive
    from .bethe import (ExcitationPattern, GaudinCouplings, bethe_residual, build_su2q_problem,
                        potential, solve_su11, solve_su2, solve_su2q, su11_problem, su2_problem)
    from .liouville import all_permutations, build_liouvillean, permutation_operator
    rng = np.random.default_rng(seed)
    rows = []

    def add(name, case, value, tol):
        rows.append((name, case, float(value), tol, bool(value <= tol)))

    systems = [("chain L=3 sigma=1", chain_system(3, 1.0)),
               ("counterexample eps=0.1 sigma=1", counterexample_system(0.1, 1.0))]
    for label, s in systems:
        d = s.dim
        for q in (1, 2):
            Lq = build_liouvillean(s, q, policy)
            I = vec(np.eye(d ** q))
            scale = max(1.0, np.abs(Lq.matrix).max())
            add("unitality", f"{label} q={q}", np.linalg.norm(Lq.matrix @ I) / scale, 1e-10)
            add("trace_preservation", f"{label} q={q}", np.linalg.norm(I.conj() @ Lq.matrix) / scale, 1e-10)
            worst = max(np.linalg.norm(Lq.matrix @ vec(permutation_operator(p, d, q).matrix))
                        for p in all_permutations(q))
            add("permutation_steady_states", f"{label} q={q}", worst / scale, 1e-10)
        sp = eig_biorthonormal(build_liouvillean(s, 1, policy).matrix, policy=policy)
        add("biorthonormality", f"{label} q=1", sp.biorth_residual, policy.biorth_tol)
        add("reconstruction", f"{label} q=1", sp.reconstruction_residual, policy.biorth_tol)

    def bethe_checks(case, p, omega):
        F = bethe_residual(p, omega)
        add("bethe_residual", case, np.abs(F).max(initial=0.0), 1e-8)
        # electrostatic force equals the gradient of the pair potential
        om = [w + 0.01 * rng.standard_normal(w.shape) for w in omega]
        F = bethe_residual(p, om)
        h = 1e-6
        grad = []
        for j, w in enumerate(om):
            for k in range(w.size):
                up = [x.copy() for x in om]
                dn = [x.copy() for x in om]
                up[j][k] += h
                dn[j][k] -= h
                grad.append((potential(p, up) - potential(p, dn)) / (2 * h))
        grad = np.array(grad)
        err = np.abs(grad - F).max(initial=0.0) / max(1.0, np.abs(F).max(initial=0.0))
        add("electrostatic_gradient", case, err, 1e-6)

    c = GaudinCouplings.chain(4, 1.0)
    for nu, nd, q in (([0, 0, 0], [0, 0, 0], 1), ([0, 0, 0], [0, 0, 0], 2),
                      ([1, 0, 0], [0, 1, 0], 2)):
        pat = ExcitationPattern.for_q(nu, nd, q)
        roots, _ = solve_su11(c, pat, pat.N, seed=seed)
        bethe_checks(f"su11 L=4 q={q} up={nu} down={nd}", su11_problem(c, pat), roots.omega)
    pat = ExcitationPattern.for_q([0, 0, 0], [0, 0, 0], 1)
    roots, _ = solve_su2(c, pat, 1, seed=seed)
    bethe_checks("su2 L=4 q=1", su2_problem(c, pat), roots.omega)
    for nu, nd, counts in (([0, 0, 0], [0, 0, 0], [0, 1, 0]), ([1, 0, 0], [0, 1, 0], [0, 1, 1]),
                           ([1, 0, 0], [0, 1, 0], [1, 1, 1])):
        p = build_su2q_problem(c, 2, ExcitationPattern(nu, nd))
        roots, _ = solve_su2q(p, counts, seed=seed)
        bethe_checks(f"su2q L=4 q=2 up={nu} down={nd} M={counts}", p, roots.omega)

    for q in range(1, 6):
        M = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
        ref = permanent_naive(M)
        add("permanent_bruteforce", f"q={q}", abs(permanent(M) - ref) / max(1.0, abs(ref)), 1e-10)
    return rows


def cmd_check(cfg, policy, out: Path, threads: int):
    rows = run_checks(policy, int(cfg.get("seed", 0)))
    path = out / "check.csv"
    n = write_csv(path, ["check", "case", "value", "tolerance", "passed"], rows)
    for r in rows:
        print(f"{'PASS' if r[4] else 'FAIL'}  {r[0]:<26} {r[1]:<34} {r[2]:.3e} <= {r[3]:.0e}")
    if not all(r[4] for r in rows):
        raise NumericalFailure("invariant suite failed")
    return {path: n}, {}


COMMANDS = {"gap": cmd_gap, "bethe": cmd_bethe, "sample": cmd_sample, "mixing": cmd_mixing,
            "control-time": cmd_control_time, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdesign", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML or JSON experiment config")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--deterministic", action="store_true", help="reproducible single-worker run")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for independent tasks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.seed is not None:
            cfg["seed"] = args.seed
        _check_finite(cfg)
        if args.command != "check" and not cfg:
            raise ConfigError("--config", f"the {args.command} command needs a config")
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        policy = policy_from_config(cfg, args.deterministic)
        threads = 1 if args.deterministic else args.threads
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs, seeds = COMMANDS[args.command](cfg, policy, out, threads)
        man = write_manifest(out, args.command, cfg, outputs, seeds, started, args.deterministic)
        print(f"wrote {', '.join(str(p) for p in outputs)} and {man}")
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, BetheConvergenceError, np.linalg.LinAlgError, FloatingPointError,
            DenseCapError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
