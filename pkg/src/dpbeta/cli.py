"""Command-line front end: release, estimate, infer, simulate, mle.

Every command writes into ``--out-dir`` a ``manifest.json`` with the
resolved configuration, the seed and SHA-256 hashes of the inputs and of
every artifact. Timing and memory figures go to ``resources.json``, the one
file that is not reproducible run to run and so is left out of the hashes.

Exit codes: 0 success, 1 numeric failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import resource
import secrets
import sys
import time
import tracemalloc
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, betamodel, simulate as sim
from .bootstrap import DEFAULT_GRID, DEFAULT_M, BootstrapError, replicate_rng, select_delta
from .graph import EdgeListError, load_edge_list, save_edge_list
from .inference import (
    bh_procedure,
    coordinate_pvalues,
    global_maxnorm_test,
    simultaneous_region,
)
from .moments import estimate_theta, plugin_variances, write_estimates, write_variances
from .privacy import (
    NoiseSchedule,
    alpha_for_pi,
    jitter,
    load_schedule,
    privacy_level,
    regime_diagnostic,
)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
INVALID_LIMIT = 0.5

# keys that describe how a run executes rather than what it computes
_RUNTIME_KEYS = {"threads", "config", "func", "command", "out_dir"}


class UsageError(Exception):
    """Bad input or configuration (exit code 2)."""


class NumericFailure(Exception):
    """The computation ran but produced an unusable result (exit code 1)."""


# ---------------------------------------------------------------- helpers


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class OutputDir:
    """Collects artifacts and their hashes for the manifest."""

    def __init__(self, path: str):
        self.path = Path(path)
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise UsageError(f"cannot create output directory {path}: {e}") from None
        self.hashes: dict[str, str] = {}

    def write_bytes(self, name: str, data: bytes, *, tracked: bool = True) -> None:
        (self.path / name).write_bytes(data)
        if tracked:
            self.hashes[name] = _sha256(data)

    def write_json(self, name: str, obj, *, tracked: bool = True) -> None:
        self.write_bytes(name, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode(), tracked=tracked)

    def write_csv(self, name: str, header, rows, *, tracked: bool = True) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.write_bytes(name, buf.getvalue().encode(), tracked=tracked)

    def adopt(self, name: str) -> None:
        """Hash a file some library writer already put in the directory."""
        self.hashes[name] = _sha256((self.path / name).read_bytes())


def _num(x) -> str:
    """Exact, platform-stable text for a float; empty for undefined values."""
    if x is None:
        return ""
    x = float(x)
    return repr(x) if np.isfinite(x) else ("nan" if np.isnan(x) else repr(x))


def _json_float(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _read_input(path: str) -> tuple[bytes, str]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}") from None
    return data, _sha256(data)


def _load_graph(path: str, inputs: dict):
    data, digest = _read_input(path)
    inputs[path] = digest
    try:
        return load_edge_list(data)
    except EdgeListError as e:
        raise UsageError(f"{path}: {e}") from None


def _resolve_schedule(args, p: int, inputs: dict, *, required: bool) -> NoiseSchedule:
    if args.schedule is not None:
        path = args.schedule
        if not Path(path).is_file():
            raise UsageError(f"schedule file not found: {path}")
        inputs[path] = _read_input(path)[1]
        try:
            sched = load_schedule(path, p)
        except ValueError as e:
            raise UsageError(str(e)) from None
    elif args.pi is not None:
        a = alpha_for_pi(args.pi)
        sched = NoiseSchedule.constant(a, a)
    elif args.alpha is not None:
        beta = args.alpha if args.beta is None else args.beta
        try:
            sched = NoiseSchedule.constant(args.alpha, beta)
        except ValueError as e:
            raise UsageError(str(e)) from None
    elif required:
        raise UsageError("give a noise schedule: --alpha/--beta, --pi or --schedule")
    else:
        sched = NoiseSchedule.zero()
    try:
        sched.check_size(p)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return sched


def _seed(args) -> tuple[int, bool]:
    if args.seed is not None:
        return int(args.seed), False
    return secrets.randbits(63), True


def _floats_arg(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _subset_arg(text: str, p: int) -> np.ndarray:
    if text.startswith("@"):
        path = text[1:]
        try:
            text = Path(path).read_text().replace("\n", ",")
        except OSError as e:
            raise UsageError(f"cannot read subset file {path}: {e.strerror or e}") from None
    try:
        idx = np.array(sorted({int(t) for t in text.split(",") if t.strip()}), dtype=np.int64)
    except ValueError:
        raise UsageError(f"bad subset {text!r}") from None
    if idx.size == 0 or idx.min() < 0 or idx.max() >= p:
        raise UsageError(f"subset must hold node indices in [0, {p})")
    return idx


def _peak_rss_bytes() -> int:
    # ru_maxrss is in KiB on Linux
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def _measured(fn, *a, **kw):
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        out = fn(*a, **kw)
    finally:
        secs = time.perf_counter() - t0
        peak = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
    return out, {"seconds": secs, "peak_bytes": peak}


def _config_record(args) -> dict:
    rec = {}
    for k, v in sorted(vars(args).items()):
        if k in _RUNTIME_KEYS:
            continue
        if isinstance(v, tuple):
            v = list(v)
        rec[k] = v
    return rec


def _finish(out: OutputDir, args, seed, generated: bool, inputs: dict, resources: dict, t0: float) -> None:
    resources = dict(resources)
    resources["threads"] = args.threads
    resources["wall_seconds"] = time.perf_counter() - t0
    resources["peak_rss_bytes"] = _peak_rss_bytes()
    out.write_json("resources.json", resources, tracked=False)
    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": seed,
        "seed_generated": generated,
        "config": _config_record(args),
        "inputs": inputs,
        "artifacts": dict(sorted(out.hashes.items())),
    }
    out.write_json("manifest.json", manifest, tracked=False)


def _warn(msg: str) -> None:
    print(f"dpbeta: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_release(args) -> int:
    t0 = time.perf_counter()
    inputs: dict = {}
    x = _load_graph(args.input, inputs)
    sched = _resolve_schedule(args, x.p, inputs, required=True)
    seed, generated = _seed(args)
    out = OutputDir(args.out_dir)

    z = jitter(x, sched, np.random.default_rng(seed))
    out.write_bytes("release.edges", save_edge_list(z))

    lvl = privacy_level(sched)
    diag = None
    if x.p >= 3 and 0 < lvl.gamma_min <= 1:
        diag = regime_diagnostic(x.p, lvl.gamma_min, args.kappa).as_dict()
    report = {
        "pi": _json_float(lvl.pi),
        "gamma_min": lvl.gamma_min,
        "gamma_max": lvl.gamma_max,
        "seed": seed,
        "regime_diagnostic": diag,
    }
    out.write_json("privacy.json", report)
    _finish(out, args, seed, generated, inputs, {}, t0)
    return EXIT_OK


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    inputs: dict = {}
    z = _load_graph(args.input, inputs)
    sched = _resolve_schedule(args, z.p, inputs, required=True)
    if z.p < 3:
        raise UsageError("need at least 3 nodes")
    out = OutputDir(args.out_dir)

    est, res_moment = _measured(estimate_theta, z, sched, args.method)
    write_estimates(est, out.path / "estimates.csv")
    out.adopt("estimates.csv")
    resources = {"moment": res_moment}
    summary = {
        "p": z.p,
        "n_invalid": est.n_invalid,
        "invalid_nodes": np.flatnonzero(~est.valid).tolist(),
    }
    if args.variances:
        vb = plugin_variances(z, sched, est)
        write_variances(vb, out.path / "variances.csv")
        out.adopt("variances.csv")
    if args.mle:
        try:
            fit, res_mle = _measured(betamodel.mle_private_fit, z, sched)
            out.write_csv("mle.csv", ["index", "theta_mle"], ([k, _num(t)] for k, t in enumerate(fit)))
            summary["mle"] = {"status": "converged"}
            resources["mle"] = res_mle
        except betamodel.MLEError as e:
            summary["mle"] = {"status": "failed", "reason": str(e)}
            _warn(f"MLE comparison failed: {e}")
        except ValueError as e:
            raise UsageError(str(e)) from None
    out.write_json("summary.json", summary)
    _finish(out, args, None, False, inputs, resources, t0)
    if est.n_invalid > INVALID_LIMIT * z.p:
        _warn(
            f"{est.n_invalid} of {z.p} nodes have non-positive moment averages; "
            "the release is too noisy for this graph size"
        )
        return EXIT_NUMERIC
    if est.n_invalid:
        _warn(f"{est.n_invalid} node(s) flagged nonpositive-mu")
    return EXIT_OK


def cmd_mle(args) -> int:
    t0 = time.perf_counter()
    inputs: dict = {}
    z = _load_graph(args.input, inputs)
    sched = _resolve_schedule(args, z.p, inputs, required=False)
    out = OutputDir(args.out_dir)
    try:
        u = betamodel.corrected_degrees(z, sched.alpha, sched.beta) if sched.is_constant else None
    except ValueError as e:
        raise UsageError(str(e)) from None
    if u is None:
        raise UsageError("the MLE baseline needs a constant schedule")
    try:
        fit, res = _measured(betamodel.mle_fit, u, max_sweeps=args.max_sweeps, tol=args.tol)
    except betamodel.DegenerateDegreeError as e:
        _warn(str(e))
        out.write_json("summary.json", {"status": "degenerate", "nodes": e.nodes.tolist()})
        _finish(out, args, None, False, inputs, {}, t0)
        return EXIT_NUMERIC
    except betamodel.MLEConvergenceError as e:
        _warn(str(e))
        out.write_json("summary.json", {"status": "not-converged", "residual": e.residual, "sweeps": e.sweeps})
        _finish(out, args, None, False, inputs, {}, t0)
        return EXIT_NUMERIC
    resid = float(np.max(np.abs(betamodel.fitted_degrees(fit) - u)))
    out.write_csv("mle.csv", ["index", "theta_mle"], ([k, _num(t)] for k, t in enumerate(fit)))
    out.write_json("summary.json", {"status": "converged", "p": z.p, "residual": resid})
    _finish(out, args, None, False, inputs, {"mle": res}, t0)
    return EXIT_OK


def _read_fixture(path: str, inputs: dict):
    data, digest = _read_input(path)
    inputs[path] = digest
    rows = list(csv.DictReader(io.StringIO(data.decode())))
    if not rows or not {"index", "theta_hat", "nu"} <= set(rows[0]):
        raise UsageError(f"{path}: fixture needs columns index,theta_hat,nu")
    try:
        idx = np.array([int(r["index"]) for r in rows])
        theta = np.array([float(r["theta_hat"]) for r in rows])
        nu = np.array([float(r["nu"]) for r in rows])
        b = np.array([float(r["b"]) for r in rows]) if "b" in rows[0] else None
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from None
    return idx, theta, nu, b


def _null_vector(args, size: int, inputs: dict) -> np.ndarray:
    if args.null is None:
        return np.zeros(size)
    try:
        return np.full(size, float(args.null))
    except ValueError:
        pass
    data, digest = _read_input(args.null)
    inputs[args.null] = digest
    vals = [float(r[1]) for r in csv.reader(io.StringIO(data.decode())) if r and r[0] != "index"]
    if len(vals) != size:
        raise UsageError(f"{args.null}: expected {size} null values, got {len(vals)}")
    return np.array(vals)


def cmd_infer(args) -> int:
    t0 = time.perf_counter()
    inputs: dict = {}
    seed, generated = _seed(args)
    resources: dict = {}
    report: dict = {"level": args.level, "mode": args.mode}

    if args.fixture is not None:
        idx_all, theta, nu, b = _read_fixture(args.fixture, inputs)
        p = args.p if args.p is not None else idx_all.size
        report["source"] = "fixture"
        report["delta_opt"] = None
        pos = {k: n for n, k in enumerate(idx_all.tolist())}
        if args.subset is not None:
            want = _subset_arg(args.subset, max(idx_all.max() + 1, p))
            missing = [k for k in want.tolist() if k not in pos]
            if missing:
                raise UsageError(f"subset nodes {missing[:10]} are not in the fixture")
            rows = np.array([pos[k] for k in want.tolist()])
        else:
            rows = np.arange(idx_all.size)
        subset = idx_all[rows]
        theta_s, nu_s = theta[rows], nu[rows]
        b_s = None if b is None else b[rows]
        out = OutputDir(args.out_dir)
    else:
        if args.input is None:
            raise UsageError("infer needs --input or --fixture")
        z = _load_graph(args.input, inputs)
        p = z.p
        if p < 4:
            raise UsageError("need at least 4 nodes")
        sched = _resolve_schedule(args, p, inputs, required=True)
        out = OutputDir(args.out_dir)
        est = estimate_theta(z, sched)
        valid = est.valid
        if args.subset is not None:
            subset = _subset_arg(args.subset, p)
            bad = subset[~valid[subset]]
            if bad.size:
                raise NumericFailure(f"requested nodes {bad[:10].tolist()} have undefined estimates")
        else:
            subset = np.flatnonzero(valid)
            if subset.size == 0:
                raise NumericFailure("no node has a defined estimate")
            if subset.size < p:
                _warn(f"{p - subset.size} node(s) with undefined estimates left out of the region")
        if est.n_invalid > INVALID_LIMIT * p:
            raise NumericFailure(f"{est.n_invalid} of {p} nodes have undefined estimates")
        t1 = time.perf_counter()
        try:
            sel = select_delta(
                z, sched, grid=args.grid, m=args.m, subset=subset, seed=seed, m_bias=args.m_bias, est=est
            )
        except BootstrapError as e:
            raise NumericFailure(str(e)) from None
        resources["algorithm"] = {
            "seconds": time.perf_counter() - t1,
            "seconds_per_bootstrap_replicate": float(np.mean(sel.timings)) if sel.timings else None,
        }
        out.write_json("bootstrap.json", sel.as_dict())
        report.update(source="release", delta_opt=sel.delta_opt, grid=list(sel.grid),
                      scores=[_json_float(s) for s in sel.scores], m=args.m,
                      n_invalid=est.n_invalid)
        theta_s = est.theta[subset]
        nu_s = sel.nu_opt[subset]
        if not np.all(np.isfinite(nu_s) & (nu_s > 0)):
            raise NumericFailure("bootstrap variance undefined for some requested nodes")
        b_s = None
        if args.mode == "fixed-gamma":
            b_s = plugin_variances(z, sched, est).b[subset]

    try:
        region = simultaneous_region(theta_s, nu_s, args.level, p, subset=subset)
    except ValueError as e:
        raise NumericFailure(str(e)) from None
    out.write_csv("region.csv", ["index", "center", "halfwidth"],
                  ([k, _num(c), _num(h)] for k, c, h in region.rows()))
    report.update(subset_size=int(subset.size), multiplier=region.multiplier, p=p)

    if args.bh is not None:
        null = _null_vector(args, subset.size, inputs)
        if args.mode == "fixed-gamma":
            if b_s is None:
                raise UsageError("fixed-gamma mode needs b values (fixture column 'b')")
            stat, pv = coordinate_pvalues(theta_s, b=b_s, p=p, mode="fixed-gamma", null=null)
        else:
            stat, pv = coordinate_pvalues(theta_s, nu=nu_s, p=p, mode="vanishing-gamma", null=null)
        if np.isnan(pv).any():
            raise NumericFailure("undefined p-values; check the variance inputs")
        rej = bh_procedure(pv, args.bh)
        out.write_csv("pvalues.csv", ["index", "statistic", "pvalue"],
                      ([k, _num(s), _num(q)] for k, s, q in zip(subset.tolist(), stat, pv)))
        out.write_json("bh.json", {"q": args.bh, "mode": args.mode, "rejected": subset[rej].tolist()})
    if args.global_test:
        null = _null_vector(args, subset.size, inputs)
        res = global_maxnorm_test(theta_s, nu_s, p, null=null, m_mc=args.m_mc, rng=replicate_rng(seed, 2))
        out.write_json("global_test.json", res.as_dict())

    out.write_json("infer.json", report)
    _finish(out, args, seed, generated, inputs, resources, t0)
    return EXIT_OK


def _worker_init() -> None:
    # one BLAS thread per worker process; parallelism comes from the pool
    threadpool_limits(1)


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    seed, generated = _seed(args)
    sd = 0.2
    if args.theta_var is not None:
        sd = float(np.sqrt(args.theta_var))
    elif args.theta_std is not None:
        sd = args.theta_std
    try:
        cfg = sim.SimulationConfig(
            p=args.p, alpha=args.alpha, beta=args.beta, replicates=args.replicates, seed=seed,
            theta_sd=sd, infer=args.infer, grid=tuple(args.grid), m=args.m, m_bias=args.m_bias,
            levels=tuple(args.levels), mle=args.mle,
        )
        cfg.schedule
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = OutputDir(args.out_dir)
    report = sim.simulate(cfg, jobs=args.threads, initializer=_worker_init)

    levels = [str(l) for l in cfg.levels]
    header = ["replicate", "loss", "n_invalid"]
    if cfg.mle:
        header += ["loss_mle", "mle_converged"]
    if cfg.infer:
        header += ["delta_opt"] + [f"covered_{l}" for l in levels]
    rows = []
    for r in report.rows:
        row = [r.replicate, _num(r.loss), r.n_invalid]
        if cfg.mle:
            row += [_num(r.loss_mle), int(bool(r.mle_converged))]
        if cfg.infer:
            row += [_num(r.delta_opt)] + [int(r.covered[l]) for l in levels]
        rows.append(row)
    out.write_csv("replicates.csv", header, rows)
    out.write_json("summary.json", {"config": sim.config_dict(cfg), **report.summary()})
    out.write_csv(
        "replicate_resources.csv",
        ["replicate", "seconds", "peak_bytes", "seconds_mle", "peak_bytes_mle", "seconds_infer"],
        ([r.replicate, _num(r.seconds), r.peak_bytes, _num(r.seconds_mle),
          "" if r.peak_bytes_mle is None else r.peak_bytes_mle, _num(r.seconds_infer)]
         for r in report.rows),
        tracked=False,
    )
    _finish(out, args, seed, generated, {}, report.resources(), t0)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(sp: argparse.ArgumentParser, *, seed: bool) -> None:
    sp.add_argument("--out-dir", help="directory for artifacts and manifest.json")
    sp.add_argument("--threads", type=int, default=1, help="worker threads / processes (default 1)")
    sp.add_argument("--config", help="JSON file of option values; explicit flags win")
    if seed:
        sp.add_argument("--seed", type=int, help="RNG seed; generated and recorded when omitted")


def _schedule_opts(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("noise schedule")
    g.add_argument("--alpha", type=float, help="probability of reporting an edge regardless")
    g.add_argument("--beta", type=float, help="probability of reporting no edge regardless (default: alpha)")
    g.add_argument("--pi", type=float, help="target privacy level; sets alpha = beta = 1/(1+e^pi)")
    g.add_argument("--schedule", help="schedule file: 'alpha,beta' or rows 'i,j,alpha,beta'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpbeta", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("release", help="jitter a network into a private release")
    sp.add_argument("--input", help="edge-list file of the original network")
    sp.add_argument("--kappa", type=float, default=2.0, help="band width of the regime diagnostic")
    _schedule_opts(sp)
    _common(sp, seed=True)
    sp.set_defaults(func=cmd_release)

    sp = sub.add_parser("estimate", help="moment estimates of node parameters")
    sp.add_argument("--input", help="edge-list file of the release")
    sp.add_argument("--variances", action="store_true", help="also write plug-in variances")
    sp.add_argument("--mle", action="store_true", help="also fit the corrected-degree MLE")
    sp.add_argument("--method", default="auto", choices=["auto", "fast", "matrix", "reference"],
                    help="moment computation path (default auto)")
    _schedule_opts(sp)
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("infer", help="bootstrap-calibrated simultaneous inference")
    sp.add_argument("--input", help="edge-list file of the release")
    sp.add_argument("--fixture", help="CSV index,theta_hat,nu[,b] used instead of estimation")
    sp.add_argument("--p", type=int, help="network size for --fixture (default: row count)")
    sp.add_argument("--grid", type=_floats_arg, default=DEFAULT_GRID, help="comma-separated delta grid")
    sp.add_argument("--m", type=int, default=DEFAULT_M, help="bootstrap replicates")
    sp.add_argument("--m-bias", type=int, help="leave-one-out rounds for the bias step (default: --m)")
    sp.add_argument("--level", type=float, default=0.95, help="joint confidence level")
    sp.add_argument("--subset", help="node indices 'i,j,...' or '@file' (default: all defined nodes)")
    sp.add_argument("--mode", default="vanishing-gamma", choices=["vanishing-gamma", "fixed-gamma"],
                    help="studentization for coordinate tests")
    sp.add_argument("--bh", type=float, metavar="Q", help="run Benjamini-Hochberg at rate Q")
    sp.add_argument("--global-test", action="store_true", help="Monte-Carlo max-norm test of the null")
    sp.add_argument("--null", help="null value (number or CSV index,value; default 0)")
    sp.add_argument("--m-mc", type=int, default=1000, help="Monte-Carlo draws for the global test")
    _schedule_opts(sp)
    _common(sp, seed=True)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("simulate", help="replicated simulation study")
    sp.add_argument("--p", type=int, default=1000, help="network size (default 1000)")
    sp.add_argument("--alpha", type=float, default=0.0, help="alpha (= beta unless --beta)")
    sp.add_argument("--beta", type=float, help="probability of reporting no edge regardless")
    sp.add_argument("--replicates", type=int, default=20, help="number of replicates (default 20)")
    th = sp.add_mutually_exclusive_group()
    th.add_argument("--theta-std", type=float, help="standard deviation of node parameters (default 0.2)")
    th.add_argument("--theta-var", type=float, help="variance of node parameters")
    sp.add_argument("--infer", action="store_true", help="run the full inference and record coverage")
    sp.add_argument("--grid", type=_floats_arg, default=DEFAULT_GRID, help="comma-separated delta grid")
    sp.add_argument("--m", type=int, default=DEFAULT_M, help="bootstrap replicates")
    sp.add_argument("--m-bias", type=int, help="leave-one-out rounds for the bias step (default: --m)")
    sp.add_argument("--levels", type=_floats_arg, default=(0.9, 0.95, 0.99),
                    help="comma-separated joint confidence levels")
    sp.add_argument("--mle", action="store_true", help="also fit the corrected-degree MLE")
    _common(sp, seed=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("mle", help="corrected-degree maximum likelihood baseline")
    sp.add_argument("--input", help="edge-list file (release or original)")
    sp.add_argument("--max-sweeps", type=int, default=betamodel.MLE_MAX_SWEEPS, help="fixed-point sweep limit")
    sp.add_argument("--tol", type=float, default=betamodel.MLE_TOL, help="sup-norm tolerance on fitted degrees")
    _schedule_opts(sp)
    _common(sp, seed=False)
    sp.set_defaults(func=cmd_mle)
    return ap


def _subparser(ap: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for act in ap._subparsers._group_actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


_REQUIRED = {
    "release": ("input", "out_dir"),
    "estimate": ("input", "out_dir"),
    "infer": ("out_dir",),
    "simulate": ("out_dir",),
    "mle": ("input", "out_dir"),
}


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags, layering a ``--config`` JSON file under the explicit ones."""
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise UsageError(f"cannot read config {args.config}: {e.strerror or e}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"{args.config}: invalid JSON ({e})") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        sp = _subparser(ap, args.command)
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, val in cfg.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in known or dest in ("help", "config"):
                raise UsageError(f"{args.config}: unknown option {key!r} for {args.command}")
            act = known[dest]
            try:
                if isinstance(val, list) and act.type is _floats_arg:
                    val = tuple(float(v) for v in val)
                elif isinstance(val, str) and act.type is not None:
                    val = act.type(val)
            except (ValueError, argparse.ArgumentTypeError) as e:
                raise UsageError(f"{args.config}: option {key!r}: {e}") from None
            defaults[dest] = val
        sp.set_defaults(**defaults)
        args = ap.parse_args(argv)
    missing = [d for d in _REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        with threadpool_limits(args.threads):
            return args.func(args)
    except SystemExit as e:  # argparse usage errors and --help
        return int(e.code or 0)
    except UsageError as e:
        _warn(str(e))
        return EXIT_USAGE
    except NumericFailure as e:
        _warn(str(e))
        return EXIT_NUMERIC
    except betamodel.MLEError as e:
        _warn(str(e))
        return EXIT_NUMERIC
    except OSError as e:
        _warn(f"{getattr(e, 'filename', '') or ''} {e.strerror or e}".strip())
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
