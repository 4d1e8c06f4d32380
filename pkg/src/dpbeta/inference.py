"""Simultaneous confidence boxes, coordinate tests, BH and the global max-norm test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtr

# rational approximation of the normal quantile (Acklam), |rel err| < 1.15e-9
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(u: float) -> float:
    if u < _P_LOW:
        q = math.sqrt(-2 * math.log(u))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    if u > 1 - _P_LOW:
        q = math.sqrt(-2 * math.log1p(-u))
        return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    q = u - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
    )


def normal_cdf(x):
    return ndtr(x)


def normal_quantile(u: float) -> float:
    """Inverse standard normal CDF: rational approximation plus one Halley refinement."""
    u = float(u)
    if not (0.0 < u < 1.0):
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    x = _acklam(u)
    # residual Phi(x) - u; above the median work with 1 - u, which is exact
    if u > 0.5:
        e = (1.0 - u) - 0.5 * math.erfc(x / math.sqrt(2))
    else:
        e = 0.5 * math.erfc(-x / math.sqrt(2)) - u
    g = e * math.sqrt(2 * math.pi) * math.exp(0.5 * x * x)
    return x - g / (1 + 0.5 * x * g)


def box_multiplier(level: float, size: int) -> float:
    """Critical value of ``max |xi_k|`` over ``size`` independent standard normals."""
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    return normal_quantile((1 + level ** (1.0 / size)) / 2)


@dataclass
class ConfidenceRegion:
    subset: np.ndarray
    center: np.ndarray
    halfwidths: np.ndarray
    level: float
    multiplier: float

    def contains(self, a) -> bool:
        a = np.asarray(a, dtype=float)
        return bool(np.all(np.abs(self.center - a) <= self.halfwidths))

    def rows(self):
        for k, c, h in zip(self.subset.tolist(), self.center.tolist(), self.halfwidths.tolist()):
            yield k, c, h


def _scale(p: int) -> int:
    return (p - 1) * (p - 2)


def _check_nu(nu: np.ndarray) -> None:
    if not np.all(np.isfinite(nu)) or np.any(nu <= 0):
        raise ValueError("variance proxies must be finite and positive")


def simultaneous_region(theta_s, nu_s, level: float, p: int, subset=None) -> ConfidenceRegion:
    """Axis-aligned box covering all coordinates in ``subset`` jointly at ``level``."""
    theta_s = np.asarray(theta_s, dtype=float)
    nu_s = np.asarray(nu_s, dtype=float)
    if theta_s.shape != nu_s.shape or theta_s.ndim != 1 or theta_s.size == 0:
        raise ValueError("theta_s and nu_s must be matching non-empty vectors")
    _check_nu(nu_s)
    if not np.all(np.isfinite(theta_s)):
        raise ValueError("centre has undefined entries")
    c = box_multiplier(level, theta_s.size)
    half = c * np.sqrt(nu_s / _scale(p))
    subset = np.arange(theta_s.size) if subset is None else np.asarray(subset)
    return ConfidenceRegion(subset, theta_s, half, level, c)


@dataclass
class TestResult:
    statistic: float
    pvalue: float
    method: str
    m_mc: int | None = None

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "pvalue": self.pvalue, "method": self.method, "m_mc": self.m_mc}


def two_sided_pvalue(stat):
    """``2 * (1 - Phi(|stat|))`` evaluated without cancellation."""
    return erfc(np.abs(stat) / math.sqrt(2))


def coordinate_pvalues(theta, b=None, nu=None, p: int | None = None, mode: str = "fixed-gamma", null=0.0):
    """Per-node two-sided z-tests of ``theta_l = null``.

    ``fixed-gamma`` studentizes with ``sqrt(p-1) / sqrt(b_l)``;
    ``vanishing-gamma`` with ``sqrt(N) / sqrt(nu_l)`` where ``nu`` may be a
    bootstrap proxy. Undefined inputs give NaN p-values.
    """
    theta = np.asarray(theta, dtype=float)
    if p is None:
        p = theta.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        if mode == "fixed-gamma":
            if b is None:
                raise ValueError("fixed-gamma mode needs b")
            stat = math.sqrt(p - 1) * np.abs(theta - null) / np.sqrt(np.asarray(b, dtype=float))
        elif mode == "vanishing-gamma":
            if nu is None:
                raise ValueError("vanishing-gamma mode needs nu")
            stat = math.sqrt(_scale(p)) * np.abs(theta - null) / np.sqrt(np.asarray(nu, dtype=float))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    stat = np.where(np.isfinite(stat), stat, np.nan)
    return stat, two_sided_pvalue(stat)


def bh_procedure(pvalues, q: float) -> np.ndarray:
    """Benjamini-Hochberg step-up rule; returns the sorted indices rejected at rate ``q``."""
    pv = np.asarray(pvalues, dtype=float)
    if np.any((pv < 0) | (pv > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = pv.size
    if m == 0:
        return np.array([], dtype=int)
    order = np.argsort(pv, kind="stable")
    below = pv[order] <= q * np.arange(1, m + 1) / m
    if not below.any():
        return np.array([], dtype=int)
    k = np.flatnonzero(below).max()
    return np.sort(np.flatnonzero(pv <= pv[order][k]))


def maxnorm_statistic(theta_s, nu_s, p: int, null=None) -> float:
    theta_s = np.asarray(theta_s, dtype=float)
    nu_s = np.asarray(nu_s, dtype=float)
    _check_nu(nu_s)
    null = np.zeros_like(theta_s) if null is None else np.asarray(null, dtype=float)
    return float(math.sqrt(_scale(p)) * np.max(np.abs(theta_s - null) / np.sqrt(nu_s)))


def global_maxnorm_test(theta_s, nu_s, p: int, null=None, m_mc: int = 1000, rng=None) -> TestResult:
    """Monte-Carlo p-value of the studentized max-norm statistic against ``|xi|_inf``."""
    if m_mc < 1000:
        raise ValueError("need at least 1000 Monte-Carlo draws")
    if rng is None:
        rng = np.random.default_rng()
    stat = maxnorm_statistic(theta_s, nu_s, p, null)
    zeta = rng.standard_normal((m_mc, np.size(theta_s)))
    pval = float(np.mean(np.abs(zeta).max(axis=1) >= stat))
    return TestResult(stat, pval, "global max-norm MC", m_mc)


def maxnorm_pvalue_exact(stat: float, size: int) -> float:
    """``P(|xi|_inf >= stat)`` for ``size`` independent standard normals."""
    return float(1 - (1 - two_sided_pvalue(stat)) ** size)
