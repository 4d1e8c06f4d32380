"""Dense matrix kernels shared by the estimator, the variance formulas and the oracle.

Every ``phi`` matrix here is symmetric with a zero diagonal, which makes the
restrictions ``i != j``, ``i, j != l`` in the triple sums hold automatically.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def pair_count(p: int) -> int:
    """Size of the index set of pairs ``i<j`` avoiding a fixed node."""
    return (p - 1) * (p - 2) // 2


def logistic_matrix(theta: np.ndarray) -> np.ndarray:
    """``expit(theta_i + theta_j)`` with a zero diagonal."""
    q = expit(theta[:, None] + theta[None, :])
    np.fill_diagonal(q, 0.0)
    return q


def triple_sums(phi1: np.ndarray, phi0: np.ndarray):
    """Per-node sums of the two triple products over pairs ``i<j``.

    Returns ``(s1, s2, g)`` where
    ``s1[l] = sum_{i<j} phi1[i,l] phi0[i,j] phi1[l,j]``,
    ``s2[l] = sum_{i<j} phi0[i,l] phi1[i,j] phi0[l,j]`` and ``g = phi0 @ phi1``.
    """
    g = phi0 @ phi1
    s1 = 0.5 * np.einsum("il,il->l", phi1, g)
    s2 = 0.5 * np.einsum("li,li->l", phi0, g)
    return s1, s2, g


def var_z_matrix(theta: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Closed-form variance of a released pair under the beta-model, zero diagonal."""
    q = expit(theta[:, None] + theta[None, :])
    v = (alpha * (1 - q) + (1 - beta) * q) * ((1 - alpha) * (1 - q) + beta * q)
    np.fill_diagonal(v, 0.0)
    return v


def variance_terms(g: np.ndarray, mu1: np.ndarray, mu2: np.ndarray, varz: np.ndarray):
    """Linear weights and the two variance components built from them.

    ``g`` is ``phi0 @ phi1`` (observed or expected). Returns
    ``(lam, b, btilde)`` with ``lam[i, l]`` the weight of pair ``(i, l)`` in
    the linear part of the expansion of the estimate for node ``l``.
    """
    p = g.shape[0]
    n = (p - 1) * (p - 2)
    lam = (g / mu1[None, :] + g.T / mu2[None, :]) / (p - 2)
    np.fill_diagonal(lam, 0.0)
    b = np.einsum("il,il->l", lam * lam, varz) / (p - 1)
    vv = varz @ varz
    cubic = np.einsum("il,il->l", varz, vv)
    btilde = ((mu1 + mu2) / (mu1 * mu2)) ** 2 * cubic / (2 * n)
    return lam, b, btilde
