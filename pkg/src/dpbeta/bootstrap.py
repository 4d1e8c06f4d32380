"""Re-jittering bootstrap, high-order bias correction and data-driven choice of delta."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import Graph
from .moments import (
    MomentEstimate,
    estimate_theta,
    graph_counts,
    means_from_counts,
    plugin_variances,
)
from .privacy import NoiseSchedule, _flip_pairs, jitter

NARROW_GRID = (0.005, 0.01, 0.02, 0.05, 0.1)
# The bootstrap spread given Z grows with delta; values past 0.1 are needed
# for it to reach the plug-in variance at moderate noise.
DEFAULT_GRID = (0.005, 0.01, 0.02, 0.05, 0.1, 0.125, 0.15, 0.175, 0.2, 0.25)
DEFAULT_M = 500


class BootstrapError(RuntimeError):
    pass


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 0.5):
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")


@dataclass(frozen=True)
class BootstrapConfig:
    delta: float
    m: int = DEFAULT_M
    seed: int = 0

    def __post_init__(self):
        _check_delta(self.delta)
        if self.m < 2:
            raise ValueError("need at least 2 bootstrap replicates")


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for replicate ``key`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def rejitter(z: Graph, delta: float, rng: np.random.Generator) -> Graph:
    """Flip each pair of the release on with prob. ``delta`` and off with prob. ``delta``."""
    _check_delta(delta)
    return jitter(z, NoiseSchedule.constant(delta, delta), rng)


def estimate_theta_dagger(zdag: Graph, schedule: NoiseSchedule, delta: float, method: str = "auto"):
    """Moment estimate on a re-jittered graph, with weights for the composed flip rates."""
    _check_delta(delta)
    return estimate_theta(zdag, schedule.bootstrap(delta), method=method)


def bootstrap_thetas(
    z: Graph, schedule: NoiseSchedule, deltas, m: int, seed: int, *, timings: list | None = None
) -> np.ndarray:
    """Bootstrap estimates for every delta, shape ``(len(deltas), m, p)``.

    Replicate ``r`` draws its uniforms from ``(seed, r)`` and reuses them for
    every delta, so the curves over delta share common random numbers.
    """
    p = z.p
    deltas = [float(d) for d in deltas]
    for d in deltas:
        _check_delta(d)
    out = np.empty((len(deltas), m, p))
    iu = np.triu_indices(p, 1)
    zu = z.upper()
    constant = schedule.is_constant
    boot = [schedule.bootstrap(d) for d in deltas]
    adj = np.zeros((p, p), dtype=bool)
    for r in range(m):
        t0 = time.perf_counter()
        u = replicate_rng(seed, r).random(zu.shape[0])
        for k, d in enumerate(deltas):
            zd = _flip_pairs(zu, d, d, u)
            adj[:] = False
            adj[iu] = zd
            adj |= adj.T
            if constant:
                counts = graph_counts(adj)
                mu1, mu2 = means_from_counts(p, boot[k].alpha, boot[k].beta, *counts)
                out[k, r] = MomentEstimate.from_means(mu1, mu2).theta
            else:
                est = estimate_theta(Graph(adj.copy(), validate=False), boot[k])
                out[k, r] = est.theta
        if timings is not None:
            timings.append(time.perf_counter() - t0)
    return out


@dataclass
class NuDagger:
    delta: float
    nu: np.ndarray  # NaN where fewer than 2 replicates were valid
    n_eff: np.ndarray
    mean_theta: np.ndarray


def nu_from_thetas(thetas: np.ndarray, delta: float) -> NuDagger:
    """Scaled spread ``N * mean((theta - mean theta)^2)`` per node over valid replicates."""
    m, p = thetas.shape
    n = (p - 1) * (p - 2)
    ok = np.isfinite(thetas)
    n_eff = ok.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(ok, thetas, 0.0).sum(axis=0) / n_eff
        dev = np.where(ok, thetas - mean, 0.0)
        nu = n * (dev**2).sum(axis=0) / n_eff
    nu[n_eff < 2] = np.nan
    return NuDagger(delta, nu, n_eff, mean)


def estimate_nu_dagger(
    z: Graph, schedule: NoiseSchedule, cfg: BootstrapConfig, subset=None
) -> NuDagger:
    """Bootstrap variance proxy for the nodes in ``subset`` (all nodes by default)."""
    thetas = bootstrap_thetas(z, schedule, [cfg.delta], cfg.m, cfg.seed)[0]
    res = nu_from_thetas(thetas, cfg.delta)
    idx = np.arange(z.p) if subset is None else np.asarray(subset)
    if np.any(res.n_eff[idx] < 2):
        bad = idx[res.n_eff[idx] < 2]
        raise BootstrapError(f"fewer than 2 valid bootstrap replicates for nodes {bad[:10].tolist()}")
    return res


def unrank_pairs(k: np.ndarray, n: int):
    """Map ranks ``0 <= k < n(n-1)/2`` to pairs ``a<b`` of ``0..n-1`` in lexicographic order."""
    k = np.asarray(k, dtype=np.int64)
    total = n * (n - 1) // 2
    if np.any((k < 0) | (k >= total)):
        raise ValueError("rank out of range")
    a = n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5).astype(np.int64)
    # guard the float square root at rank boundaries
    start = a * n - a * (a + 1) // 2
    a = np.where(start > k, a - 1, a)
    start = a * n - a * (a + 1) // 2
    nxt = (a + 1) * n - (a + 1) * (a + 2) // 2
    a = np.where(nxt <= k, a + 1, a)
    start = a * n - a * (a + 1) // 2
    b = k - start + a + 1
    return a, b


def _model_phi(theta: np.ndarray, schedule: NoiseSchedule):
    p = theta.shape[0]
    gamma = schedule.gamma_matrix(p)
    q = _kernels.logistic_matrix(theta)
    e1 = gamma * q
    e0 = gamma * (1.0 - q)
    np.fill_diagonal(e0, 0.0)
    return e1, e0


@dataclass
class BiasCorrection:
    theta_hat: np.ndarray
    bias: np.ndarray
    theta_bc: np.ndarray
    mu1_bc: np.ndarray
    mu2_bc: np.ndarray
    nu_bc: np.ndarray
    valid: np.ndarray


def bias_corrected_theta(
    z: Graph,
    schedule: NoiseSchedule,
    m: int,
    rng: np.random.Generator,
    est: MomentEstimate | None = None,
) -> BiasCorrection:
    """Leave-one-pair-out estimate of the high-order bias and the matching variance.

    The model-implied triple products at the current estimate stand in for
    the population means. Each of ``m`` rounds drops one pair from the index
    set of node ``l`` (without replacement while ``m`` does not exceed the
    number of pairs), giving a squared-relative-error bias term; their
    average is subtracted from the estimate and the plug-in variance is
    recomputed at the corrected values.
    """
    if est is None:
        est = estimate_theta(z, schedule)
    p = z.p
    h = _kernels.pair_count(p)
    valid = est.valid.copy()
    theta0 = np.where(valid, est.theta, 0.0)

    e1, e0 = _model_phi(theta0, schedule)
    s1, s2, _ = _kernels.triple_sums(e1, e0)

    n_sub = p - 1
    ranks = np.empty((p, m), dtype=np.int64)
    for l in range(p):
        ranks[l] = rng.choice(h, size=m, replace=m > h)
    a, b = unrank_pairs(ranks, n_sub)
    nodes = np.arange(p)[:, None]
    i = a + (a >= nodes)
    j = b + (b >= nodes)
    t1 = e1[i, nodes] * e0[i, j] * e1[nodes, j]
    t2 = e0[i, nodes] * e1[i, j] * e0[nodes, j]
    mt1 = (s1[:, None] - t1) / (h - 1)
    mt2 = (s2[:, None] - t2) / (h - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rounds = 0.25 * ((est.mu2[:, None] - mt2) / mt2) ** 2 - 0.25 * ((est.mu1[:, None] - mt1) / mt1) ** 2
    bias = rounds.mean(axis=1)
    bias[~valid] = np.nan
    theta_bc = est.theta - bias

    bc0 = np.where(valid, theta_bc, 0.0)
    f1, f0 = _model_phi(bc0, schedule)
    u1, u2, _ = _kernels.triple_sums(f1, f0)
    mu1_bc, mu2_bc = u1 / h, u2 / h
    est_bc = MomentEstimate(mu1_bc, mu2_bc, theta_bc, valid & (mu1_bc > 0) & (mu2_bc > 0))
    vb = plugin_variances(z, schedule, est_bc)
    return BiasCorrection(est.theta, bias, theta_bc, mu1_bc, mu2_bc, vb.nu, est_bc.valid)


def choose_delta(grid, nu_by_delta: np.ndarray, nu_bc: np.ndarray, subset) -> tuple[int, np.ndarray]:
    """Index of the grid value minimizing ``max_{l in S} |nu_dagger_l - nu_bc_l|``.

    Ties go to the smaller delta. Nodes where either side is undefined are
    ignored; a delta with nothing left to compare scores ``inf``.
    """
    grid = np.asarray(grid, dtype=float)
    idx = np.asarray(subset)
    gap = np.abs(nu_by_delta[:, idx] - nu_bc[idx][None, :])
    gap = np.where(np.isfinite(gap), gap, -np.inf)
    score = gap.max(axis=1)
    score[~np.isfinite(score)] = np.inf
    if not np.isfinite(score).any():
        raise BootstrapError("no grid value gives a usable bootstrap variance")
    order = np.lexsort((grid, score))
    return int(order[0]), score


@dataclass
class DeltaSelection:
    grid: list[float]
    nu_dagger: np.ndarray  # (len(grid), p)
    n_eff: np.ndarray  # (len(grid), p)
    scores: np.ndarray
    delta_opt: float
    nu_opt: np.ndarray
    correction: BiasCorrection
    estimate: MomentEstimate
    timings: list[float] = field(default_factory=list)

    @property
    def theta_bc(self) -> np.ndarray:
        return self.correction.theta_bc

    @property
    def nu_bc(self) -> np.ndarray:
        return self.correction.nu_bc

    def as_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "delta_opt": self.delta_opt,
            "scores": [float(s) for s in self.scores],
            "nu_dagger": {str(d): _floats(self.nu_dagger[k]) for k, d in enumerate(self.grid)},
            "effective_m": {str(d): [int(x) for x in self.n_eff[k]] for k, d in enumerate(self.grid)},
            "nu_bc": _floats(self.nu_bc),
        }


def _floats(a) -> list:
    return [None if not np.isfinite(x) else float(x) for x in a]


def select_delta(
    z: Graph,
    schedule: NoiseSchedule,
    grid=DEFAULT_GRID,
    m: int = DEFAULT_M,
    subset=None,
    seed: int = 0,
    m_bias: int | None = None,
    est: MomentEstimate | None = None,
) -> DeltaSelection:
    """Run the bias correction and the bootstrap over ``grid``, then pick delta.

    ``m`` is the bootstrap replicate count and ``m_bias`` (default ``m``) the
    number of leave-one-out rounds. Both streams derive from ``seed``.
    """
    grid = sorted(float(d) for d in grid)
    if not grid:
        raise ValueError("empty delta grid")
    if m < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    if est is None:
        est = estimate_theta(z, schedule)
    idx = np.arange(z.p) if subset is None else np.asarray(subset)
    corr = bias_corrected_theta(z, schedule, m if m_bias is None else m_bias, replicate_rng(seed, 0), est)
    timings: list[float] = []
    thetas = bootstrap_thetas(z, schedule, grid, m, _boot_seed(seed), timings=timings)
    nus = [nu_from_thetas(thetas[k], d) for k, d in enumerate(grid)]
    nu_by = np.stack([n.nu for n in nus])
    n_eff = np.stack([n.n_eff for n in nus])
    k, scores = choose_delta(grid, nu_by, corr.nu_bc, idx)
    return DeltaSelection(grid, nu_by, n_eff, scores, grid[k], nu_by[k], corr, est, timings)


def _boot_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(1,)).generate_state(1, np.uint64)[0])
