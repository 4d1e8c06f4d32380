"""Jittering release mechanism and its edge-privacy accounting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .graph import Graph

Number = Union[float, np.ndarray]


class NoiseSchedule:
    """Flip probabilities ``(alpha, beta)`` for every unordered pair.

    ``alpha`` is the chance an absent edge is reported present and ``beta`` the
    chance a present edge is reported absent. A schedule is either constant
    (two floats) or per-pair (two symmetric ``p x p`` matrices whose diagonal
    is ignored).
    """

    def __init__(self, alpha: Number, beta: Number):
        a = np.asarray(alpha, dtype=float)
        b = np.asarray(beta, dtype=float)
        if a.shape != b.shape or a.ndim not in (0, 2):
            raise ValueError("alpha and beta must both be scalars or both p x p matrices")
        if a.ndim == 2:
            if a.shape[0] != a.shape[1]:
                raise ValueError("per-pair schedule matrices must be square")
            a = a.copy()
            b = b.copy()
            np.fill_diagonal(a, 0.0)
            np.fill_diagonal(b, 0.0)
            if not (np.allclose(a, a.T, rtol=0, atol=0) and np.allclose(b, b.T, rtol=0, atol=0)):
                raise ValueError("per-pair schedule must be symmetric")
            a.flags.writeable = False
            b.flags.writeable = False
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("flip probabilities must be finite")
        if np.any(a < 0) or np.any(b < 0) or np.any(a + b > 1):
            raise ValueError("need alpha, beta >= 0 and alpha + beta <= 1")
        self._alpha = float(a) if a.ndim == 0 else a
        self._beta = float(b) if b.ndim == 0 else b

    @classmethod
    def constant(cls, alpha: float, beta: float) -> "NoiseSchedule":
        return cls(float(alpha), float(beta))

    @classmethod
    def zero(cls) -> "NoiseSchedule":
        return cls(0.0, 0.0)

    @classmethod
    def per_pair(cls, alpha: np.ndarray, beta: np.ndarray) -> "NoiseSchedule":
        return cls(np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float))

    @property
    def is_constant(self) -> bool:
        return isinstance(self._alpha, float)

    @property
    def alpha(self) -> Number:
        return self._alpha

    @property
    def beta(self) -> Number:
        return self._beta

    @property
    def p(self) -> int | None:
        """Node count a per-pair schedule is tied to; ``None`` for constant schedules."""
        return None if self.is_constant else self._alpha.shape[0]

    def check_size(self, p: int) -> None:
        if not self.is_constant and self.p != p:
            raise ValueError(f"schedule is for {self.p} nodes, graph has {p}")

    def alpha_matrix(self, p: int) -> np.ndarray:
        """Full ``p x p`` alpha matrix with zero diagonal."""
        return self._matrix(self._alpha, p)

    def beta_matrix(self, p: int) -> np.ndarray:
        return self._matrix(self._beta, p)

    def gamma_matrix(self, p: int) -> np.ndarray:
        """Signal retention ``1 - alpha - beta`` per pair, zero on the diagonal."""
        g = 1.0 - self.alpha_matrix(p) - self.beta_matrix(p)
        np.fill_diagonal(g, 0.0)
        return g

    def _matrix(self, v: Number, p: int) -> np.ndarray:
        self.check_size(p)
        if isinstance(v, float):
            m = np.full((p, p), v)
            np.fill_diagonal(m, 0.0)
            return m
        return np.array(v)

    def pair_values(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """``(alpha, beta)`` over pairs ``i<j`` in row-major order."""
        self.check_size(p)
        n = p * (p - 1) // 2
        if self.is_constant:
            return np.full(n, self._alpha), np.full(n, self._beta)
        iu = np.triu_indices(p, 1)
        return self._alpha[iu], self._beta[iu]

    def gamma_range(self) -> tuple[float, float]:
        if self.is_constant:
            g = 1.0 - self._alpha - self._beta
            return g, g
        p = self.p
        if p < 2:
            return 1.0, 1.0
        iu = np.triu_indices(p, 1)
        g = 1.0 - self._alpha[iu] - self._beta[iu]
        return float(g.min()), float(g.max())

    def bootstrap(self, delta: float) -> "NoiseSchedule":
        """Effective schedule of re-jittering a release with symmetric rate ``delta``."""
        scale = 1.0 - 2.0 * delta
        if self.is_constant:
            return NoiseSchedule(delta + self._alpha * scale, delta + self._beta * scale)
        a = delta + self._alpha * scale
        b = delta + self._beta * scale
        np.fill_diagonal(a, 0.0)
        np.fill_diagonal(b, 0.0)
        return NoiseSchedule(a, b)

    def permute(self, perm: np.ndarray) -> "NoiseSchedule":
        if self.is_constant:
            return self
        ix = np.ix_(perm, perm)
        return NoiseSchedule(self._alpha[ix], self._beta[ix])

    def __repr__(self) -> str:
        if self.is_constant:
            return f"NoiseSchedule(alpha={self._alpha}, beta={self._beta})"
        return f"NoiseSchedule(per-pair, p={self.p})"


def load_schedule(path: str | Path, p: int | None = None) -> NoiseSchedule:
    """Read a schedule file.

    Either a single ``alpha,beta`` line (constant schedule) or ``i,j,alpha,beta``
    rows covering every pair of a ``p``-node graph.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or all(not c.strip() for c in row):
                continue
            if row[0].strip().startswith("#"):
                continue
            rows.append([c.strip() for c in row])
    if not rows:
        raise ValueError(f"{path}: empty schedule file")
    if rows[0] == ["alpha", "beta"] or rows[0] == ["i", "j", "alpha", "beta"]:
        rows = rows[1:]
    if len(rows) == 1 and len(rows[0]) == 2:
        return NoiseSchedule.constant(float(rows[0][0]), float(rows[0][1]))
    if p is None:
        raise ValueError(f"{path}: per-pair schedule needs the node count")
    alpha = np.full((p, p), np.nan)
    beta = np.full((p, p), np.nan)
    for k, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise ValueError(f"{path}: row {k}: expected i,j,alpha,beta")
        i, j = int(row[0]), int(row[1])
        if not (0 <= i < p and 0 <= j < p) or i == j:
            raise ValueError(f"{path}: row {k}: bad pair ({i}, {j})")
        alpha[i, j] = alpha[j, i] = float(row[2])
        beta[i, j] = beta[j, i] = float(row[3])
    np.fill_diagonal(alpha, 0.0)
    np.fill_diagonal(beta, 0.0)
    if np.isnan(alpha).any():
        raise ValueError(f"{path}: schedule does not cover every pair")
    return NoiseSchedule.per_pair(alpha, beta)


def save_schedule(schedule: NoiseSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if schedule.is_constant:
            w.writerow([repr(schedule.alpha), repr(schedule.beta)])
            return
        p = schedule.p
        for i, j in zip(*np.triu_indices(p, 1)):
            w.writerow([i, j, repr(float(schedule.alpha[i, j])), repr(float(schedule.beta[i, j]))])


def _flip_pairs(x: np.ndarray, alpha: np.ndarray, beta: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply the three-way flip to pair values ``x`` using uniforms ``u``.

    ``u < alpha`` reports an edge, ``alpha <= u < alpha + beta`` reports no
    edge, and only the remaining branch copies ``x``.
    """
    on = u < alpha
    off = ~on & (u < alpha + beta)
    keep = ~(on | off)
    return on | (keep & x)


def jitter(x: Graph, schedule: NoiseSchedule, rng: np.random.Generator) -> Graph:
    """Release a sanitized copy of ``x``.

    One uniform draw is consumed per pair ``i<j`` in row-major order, so the
    outcome for a pair depends only on the seed and the pair's position.
    """
    p = x.p
    schedule.check_size(p)
    alpha, beta = schedule.pair_values(p)
    u = rng.random(alpha.shape[0])
    z = _flip_pairs(x.upper(), alpha, beta, u)
    return Graph.from_upper(p, z)


@dataclass(frozen=True)
class PrivacyLevel:
    pi: float
    gamma_min: float
    gamma_max: float


def _pair_pi(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratios = np.stack(
            [alpha / (1 - beta), beta / (1 - alpha), (1 - alpha) / beta, (1 - beta) / alpha]
        )
    ratios = np.where(np.isnan(ratios), np.inf, ratios)
    return np.log(ratios.max(axis=0))


def privacy_level(schedule: NoiseSchedule) -> PrivacyLevel:
    """Edge-DP level of the jittering mechanism; ``inf`` when a flip rate is 0 or 1."""
    if schedule.is_constant:
        a = np.array([schedule.alpha])
        b = np.array([schedule.beta])
    else:
        iu = np.triu_indices(schedule.p, 1)
        a, b = schedule.alpha[iu], schedule.beta[iu]
    gmin, gmax = schedule.gamma_range()
    if a.size == 0:
        return PrivacyLevel(0.0, gmin, gmax)
    pi = float(_pair_pi(a, b).max())
    # rounding can leave log(1) a hair below zero
    return PrivacyLevel(max(pi, 0.0), gmin, gmax)


def alpha_for_pi(pi: float) -> float:
    """Symmetric flip rate with ``log((1 - a) / a) = pi``."""
    if pi < 0:
        raise ValueError("pi must be non-negative")
    return 1.0 / (1.0 + math.exp(pi))


@dataclass(frozen=True)
class RegimeDiagnostic:
    label: str
    upper: float  # p^(-1/4)
    lower: float  # p^(-1/3) (log p)^(1/6)
    kappa: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "p_pow_neg_quarter": self.upper,
            "consistency_boundary": self.lower,
            "kappa": self.kappa,
        }


def regime_diagnostic(p: int, gamma: float, kappa: float = 2.0) -> RegimeDiagnostic:
    """Place ``gamma`` relative to the rate boundaries of the moment estimator.

    Advisory only. ``phase-a`` when gamma exceeds ``kappa * p^(-1/4)``;
    ``phase-b/boundary`` within a factor ``kappa`` of ``p^(-1/4)``;
    ``phase-c`` between that band and the consistency boundary
    ``p^(-1/3) log^(1/6) p``; ``consistency-risk`` at or below
    ``boundary / kappa``.
    """
    if p < 3:
        raise ValueError("need p >= 3")
    if not (0 < gamma <= 1):
        raise ValueError("gamma must lie in (0, 1]")
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    c1 = p ** -0.25
    c2 = p ** (-1 / 3) * math.log(p) ** (1 / 6)
    if gamma <= c2 / kappa:
        label = "consistency-risk"
    elif gamma > kappa * c1:
        label = "phase-a"
    elif gamma >= c1 / kappa:
        label = "phase-b/boundary"
    else:
        label = "phase-c"
    return RegimeDiagnostic(label, c1, c2, kappa)
