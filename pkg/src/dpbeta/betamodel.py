"""The beta-model: edge probabilities, sampling, population quantities and the MLE baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import _kernels
from .graph import Graph, degrees
from .privacy import NoiseSchedule

MLE_MAX_SWEEPS = 5000
MLE_TOL = 1e-8
DEGREE_CLAMP = 1e-6


def edge_prob(theta_i, theta_j):
    """Probability that nodes with parameters ``theta_i`` and ``theta_j`` are linked."""
    return expit(np.add(theta_i, theta_j))


def sample_graph(theta: np.ndarray, rng: np.random.Generator) -> Graph:
    """Draw a network from the beta-model; one uniform per pair ``i<j`` in row-major order."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    p = theta.shape[0]
    i, j = np.triu_indices(p, 1)
    u = rng.random(i.shape[0])
    return Graph.from_upper(p, u < expit(theta[i] + theta[j]))


def draw_theta(p: int, rng: np.random.Generator, *, std: float = 0.2, var: float | None = None):
    """Independent centred normal node parameters; ``var`` overrides ``std`` when given."""
    if var is not None:
        if var < 0:
            raise ValueError("variance must be non-negative")
        std = float(np.sqrt(var))
    if std < 0:
        raise ValueError("std must be non-negative")
    return rng.normal(0.0, std, size=p)


def read_theta(path: str | Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() in ("index", ""):
                continue
            rows.append((int(row[0]), float(row[1])))
    rows.sort()
    idx = [r[0] for r in rows]
    if idx != list(range(len(rows))):
        raise ValueError(f"{path}: indices must be exactly 0..p-1")
    return np.array([r[1] for r in rows])


def write_theta(theta: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "theta"])
        for k, t in enumerate(theta):
            w.writerow([k, repr(float(t))])


@dataclass
class PopulationOracle:
    """Exact expectations of the estimator's building blocks for known parameters."""

    mu1: np.ndarray
    mu2: np.ndarray
    lam: np.ndarray  # lam[i, l]
    varz: np.ndarray
    b: np.ndarray
    btilde: np.ndarray

    @property
    def nu(self) -> np.ndarray:
        p = self.mu1.shape[0]
        return (p - 2) * self.b + self.btilde


def expected_phi(theta: np.ndarray, schedule: NoiseSchedule):
    """Expected ``phi`` weights per pair: ``gamma * q`` and ``gamma * (1 - q)``."""
    p = theta.shape[0]
    gamma = schedule.gamma_matrix(p)
    q = _kernels.logistic_matrix(theta)
    e1 = gamma * q
    e0 = gamma * (1.0 - q)
    np.fill_diagonal(e0, 0.0)
    return e1, e0


def population_oracle(theta: np.ndarray, schedule: NoiseSchedule) -> PopulationOracle:
    """Population analogues of the moment estimator's means, weights and variances."""
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    if p < 3:
        raise ValueError("need p >= 3")
    schedule.check_size(p)
    gmin, _ = schedule.gamma_range()
    if gmin <= 0:
        raise ValueError("schedule leaves no signal (min 1 - alpha - beta <= 0)")
    e1, e0 = expected_phi(theta, schedule)
    s1, s2, g = _kernels.triple_sums(e1, e0)
    h = _kernels.pair_count(p)
    mu1, mu2 = s1 / h, s2 / h
    varz = _kernels.var_z_matrix(theta, schedule.alpha_matrix(p), schedule.beta_matrix(p))
    lam, b, btilde = _kernels.variance_terms(g, mu1, mu2, varz)
    return PopulationOracle(mu1, mu2, lam, varz, b, btilde)


class MLEError(RuntimeError):
    pass


class DegenerateDegreeError(MLEError, ValueError):
    """Some degree is 0 or ``p-1``; the likelihood has no finite maximizer."""

    def __init__(self, nodes: np.ndarray):
        super().__init__(f"degenerate degree (0 or p-1) at nodes {nodes[:10].tolist()}")
        self.nodes = nodes


class MLEConvergenceError(MLEError):
    def __init__(self, theta: np.ndarray, residual: float, sweeps: int):
        super().__init__(f"fixed point did not converge in {sweeps} sweeps (residual {residual:.3g})")
        self.theta = theta
        self.residual = residual
        self.sweeps = sweeps


def fitted_degrees(theta: np.ndarray) -> np.ndarray:
    return _kernels.logistic_matrix(np.asarray(theta, dtype=float)).sum(axis=1)


def mle_fit(u, *, max_sweeps: int = MLE_MAX_SWEEPS, tol: float = MLE_TOL) -> np.ndarray:
    """Solve the degree moment equations by the fixed-point iteration started at zero.

    ``u`` may hold real-valued targets. Iterates
    ``theta_i <- log u_i - log sum_{j != i} 1 / (exp(-theta_j) + exp(theta_i))``
    until the fitted degrees match ``u`` within ``tol`` in sup norm.
    """
    u = np.asarray(u, dtype=float)
    p = u.shape[0]
    if p < 2:
        raise ValueError("need at least two nodes")
    bad = np.flatnonzero((u <= 0) | (u >= p - 1))
    if bad.size:
        raise DegenerateDegreeError(bad)
    log_u = np.log(u)
    theta = np.zeros(p)
    resid = np.inf
    for sweep in range(max_sweeps + 1):
        et = np.exp(theta)
        w = 1.0 / (np.exp(-theta)[None, :] + et[:, None])
        np.fill_diagonal(w, 0.0)
        s = w.sum(axis=1)
        resid = float(np.max(np.abs(et * s - u)))
        if resid <= tol:
            return theta
        if sweep == max_sweeps:
            break
        theta = log_u - np.log(s)
    raise MLEConvergenceError(theta, resid, max_sweeps)


def corrected_degrees(z: Graph, alpha: float, beta: float) -> np.ndarray:
    """Debiased degree targets of the released graph, clamped inside ``(0, p-1)``."""
    p = z.p
    gamma = 1.0 - alpha - beta
    if gamma <= 0:
        raise ValueError("need 1 - alpha - beta > 0")
    d = (degrees(z) - (p - 1) * alpha) / gamma
    return np.clip(d, DEGREE_CLAMP, p - 1 - DEGREE_CLAMP)


def mle_private_fit(z: Graph, schedule: NoiseSchedule, **kw) -> np.ndarray:
    """MLE on the debiased degree sequence of a release with a constant schedule."""
    if not schedule.is_constant:
        raise ValueError("degree correction needs a constant schedule")
    return mle_fit(corrected_degrees(z, schedule.alpha, schedule.beta), **kw)
