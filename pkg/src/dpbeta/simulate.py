"""Replicated simulation harness for estimation error and interval coverage."""

from __future__ import annotations

import statistics
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import betamodel
from .bootstrap import DEFAULT_GRID, DEFAULT_M, replicate_rng, select_delta
from .inference import simultaneous_region
from .moments import estimate_theta
from .privacy import NoiseSchedule, jitter


@dataclass(frozen=True)
class SimulationConfig:
    p: int = 1000
    alpha: float = 0.0
    beta: float | None = None  # defaults to alpha
    replicates: int = 20
    seed: int = 0
    theta_sd: float = 0.2
    infer: bool = False
    grid: tuple = DEFAULT_GRID
    m: int = DEFAULT_M
    m_bias: int | None = None
    levels: tuple = (0.9, 0.95, 0.99)
    mle: bool = False

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.constant(self.alpha, self.alpha if self.beta is None else self.beta)


@dataclass
class ReplicateResult:
    replicate: int
    loss: float
    n_invalid: int
    loss_mle: float | None = None
    mle_converged: bool | None = None
    delta_opt: float | None = None
    covered: dict = field(default_factory=dict)
    # resources are kept apart from the reproducible fields
    seconds: float = 0.0
    peak_bytes: int = 0
    seconds_mle: float | None = None
    peak_bytes_mle: int | None = None
    seconds_infer: float | None = None


def _measured(fn, *args, **kw):
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kw)
    finally:
        elapsed = time.perf_counter() - t0
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
    return out, elapsed, peak


def run_replicate(cfg: SimulationConfig, r: int) -> ReplicateResult:
    """One replicate: draw parameters, sample, release, estimate, optionally infer."""
    rng = replicate_rng(cfg.seed, r)
    theta = betamodel.draw_theta(cfg.p, rng, std=cfg.theta_sd)
    x = betamodel.sample_graph(theta, rng)
    sched = cfg.schedule
    z = jitter(x, sched, rng)

    est, secs, peak = _measured(estimate_theta, z, sched)
    err = est.theta - theta
    loss = float(np.mean(err**2)) if est.valid.all() else float(np.nanmean(err**2))
    res = ReplicateResult(r, loss, est.n_invalid, seconds=secs, peak_bytes=peak)

    if cfg.mle:
        try:
            fit, s2, pk2 = _measured(betamodel.mle_private_fit, z, sched)
            res.loss_mle = float(np.mean((fit - theta) ** 2))
            res.mle_converged = True
            res.seconds_mle, res.peak_bytes_mle = s2, pk2
        except betamodel.MLEError:
            res.mle_converged = False

    if cfg.infer:
        t0 = time.perf_counter()
        sel = select_delta(
            z, sched, grid=cfg.grid, m=cfg.m, seed=int(rng.integers(2**63)), m_bias=cfg.m_bias, est=est
        )
        res.seconds_infer = time.perf_counter() - t0
        res.delta_opt = sel.delta_opt
        ok = est.valid & np.isfinite(sel.nu_opt) & (sel.nu_opt > 0)
        for lvl in cfg.levels:
            if not ok.all():
                res.covered[str(lvl)] = False
                continue
            region = simultaneous_region(est.theta, sel.nu_opt, lvl, cfg.p)
            res.covered[str(lvl)] = region.contains(theta)
    return res


def _summary(values) -> dict:
    v = [x for x in values if x is not None and np.isfinite(x)]
    if not v:
        return {"mean": None, "median": None, "stdev": None, "n": 0}
    return {
        "mean": statistics.fmean(v),
        "median": statistics.median(v),
        "stdev": statistics.stdev(v) if len(v) > 1 else 0.0,
        "n": len(v),
    }


@dataclass
class SimulationReport:
    config: SimulationConfig
    rows: list[ReplicateResult]

    def summary(self) -> dict:
        out = {"moment": _summary([r.loss for r in self.rows])}
        out["moment"]["invalid_nodes_total"] = sum(r.n_invalid for r in self.rows)
        if self.config.mle:
            out["mle"] = _summary([r.loss_mle for r in self.rows])
            out["mle"]["failures"] = sum(1 for r in self.rows if r.mle_converged is False)
        if self.config.infer:
            out["coverage"] = {
                str(l): statistics.fmean(1.0 if r.covered.get(str(l)) else 0.0 for r in self.rows)
                for l in self.config.levels
            }
            out["delta_opt_counts"] = {}
            for r in self.rows:
                key = str(r.delta_opt)
                out["delta_opt_counts"][key] = out["delta_opt_counts"].get(key, 0) + 1
        return out

    def resources(self) -> dict:
        return {
            "moment_seconds": _summary([r.seconds for r in self.rows]),
            "moment_peak_bytes": _summary([r.peak_bytes for r in self.rows]),
            "mle_seconds": _summary([r.seconds_mle for r in self.rows]),
            "mle_peak_bytes": _summary([r.peak_bytes_mle for r in self.rows]),
            "infer_seconds": _summary([r.seconds_infer for r in self.rows]),
        }


def simulate(cfg: SimulationConfig, jobs: int = 1, progress=None, initializer=None) -> SimulationReport:
    """Run all replicates; results are ordered by replicate index whatever ``jobs`` is."""
    idx = range(cfg.replicates)
    if jobs <= 1:
        rows = []
        for r in idx:
            rows.append(run_replicate(cfg, r))
            if progress:
                progress(rows[-1])
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=initializer) as ex:
            rows = list(ex.map(run_replicate, [cfg] * cfg.replicates, idx))
    return SimulationReport(cfg, rows)


def config_dict(cfg: SimulationConfig) -> dict:
    d = asdict(cfg)
    d["grid"] = list(cfg.grid)
    d["levels"] = list(cfg.levels)
    return d
