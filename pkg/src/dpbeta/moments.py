"""Method-of-moments estimation of node parameters from a jittered release.

For each node ``l`` the estimator averages two triple products of the
debiasing weights ``phi`` over pairs ``i<j`` not containing ``l``; the ratio
of the two averages targets ``exp(2 theta_l)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import Graph
from .privacy import NoiseSchedule

OK = "ok"
NONPOSITIVE_MU = "nonpositive-mu"


def phi(x, tau: int, alpha, beta):
    """Debiasing weight: ``x - alpha`` for ``tau=1`` and ``1 - beta - x`` for ``tau=0``."""
    if tau == 1:
        return np.subtract(x, alpha)
    if tau == 0:
        return np.subtract(np.subtract(1.0, beta), x)
    raise ValueError("tau must be 0 or 1")


def phi_matrices(z: Graph, schedule: NoiseSchedule):
    """Observed weight matrices ``(phi1, phi0)`` with zero diagonals."""
    p = z.p
    zf = z.adj.astype(float)
    phi1 = zf - schedule.alpha_matrix(p)
    phi0 = 1.0 - schedule.beta_matrix(p) - zf
    np.fill_diagonal(phi1, 0.0)
    np.fill_diagonal(phi0, 0.0)
    return phi1, phi0


@dataclass
class MomentEstimate:
    mu1: np.ndarray
    mu2: np.ndarray
    theta: np.ndarray  # NaN where the estimate is undefined
    valid: np.ndarray  # bool mask

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    @property
    def status(self) -> list[str]:
        return [OK if v else NONPOSITIVE_MU for v in self.valid]

    @property
    def n_invalid(self) -> int:
        return int(self.p - np.count_nonzero(self.valid))

    @classmethod
    def from_means(cls, mu1: np.ndarray, mu2: np.ndarray) -> "MomentEstimate":
        valid = (mu1 > 0) & (mu2 > 0) & np.isfinite(mu1) & np.isfinite(mu2)
        theta = np.full(mu1.shape, np.nan)
        theta[valid] = 0.5 * np.log(mu1[valid] / mu2[valid])
        return cls(mu1, mu2, theta, valid)

    def permute(self, perm) -> "MomentEstimate":
        return MomentEstimate(self.mu1[perm], self.mu2[perm], self.theta[perm], self.valid[perm])


def _check(z: Graph, schedule: NoiseSchedule) -> None:
    if z.p < 3:
        raise ValueError("need at least 3 nodes")
    schedule.check_size(z.p)


def _means_reference(z: Graph, schedule: NoiseSchedule):
    """Direct triple loop over ``l`` and pairs ``i<j`` avoiding ``l``."""
    p = z.p
    zz = z.adj.astype(float)
    a = schedule.alpha_matrix(p)
    b = schedule.beta_matrix(p)
    h = _kernels.pair_count(p)
    mu1 = np.zeros(p)
    mu2 = np.zeros(p)
    for l in range(p):
        s1 = s2 = 0.0
        for i in range(p):
            if i == l:
                continue
            for j in range(i + 1, p):
                if j == l:
                    continue
                s1 += (
                    phi(zz[i, l], 1, a[i, l], b[i, l])
                    * phi(zz[i, j], 0, a[i, j], b[i, j])
                    * phi(zz[l, j], 1, a[l, j], b[l, j])
                )
                s2 += (
                    phi(zz[i, l], 0, a[i, l], b[i, l])
                    * phi(zz[i, j], 1, a[i, j], b[i, j])
                    * phi(zz[l, j], 0, a[l, j], b[l, j])
                )
        mu1[l] = s1 / h
        mu2[l] = s2 / h
    return mu1, mu2


def _means_matrix(z: Graph, schedule: NoiseSchedule):
    phi1, phi0 = phi_matrices(z, schedule)
    s1, s2, _ = _kernels.triple_sums(phi1, phi0)
    h = _kernels.pair_count(z.p)
    return s1 / h, s2 / h


def graph_counts(adj: np.ndarray):
    """Degrees, neighbour-degree sums, closed 3-walks per node and twice the edge count.

    The 3-walk count ``(Z^3)_{ll}`` uses a single-precision product of the
    0/1 matrix, which is exact while ``p < 2**24``.
    """
    zf = adj.astype(np.float32)
    d = zf.sum(axis=1, dtype=np.float64)
    z2 = zf @ zf
    walks = np.einsum("ij,ij->i", z2, zf, dtype=np.float64)
    nbr = adj.astype(np.float64) @ d
    return d, nbr, walks, float(d.sum())


def means_from_counts(p: int, alpha: float, beta: float, d, nbr, walks, m2):
    """Triple-product means for a constant schedule from per-node graph counts.

    With ``a_i = Z_il - alpha`` (``a_l = 0``) the first sum equals
    ``((1-beta)((sum a)^2 - sum a^2) - a'Za) / 2``; the second is the mirror
    image with ``c_i = 1 - beta - Z_il``.
    """
    n1 = p - 1
    sum_a = d - alpha * n1
    sum_a2 = d * (1 - alpha) ** 2 + (n1 - d) * alpha**2
    cross = nbr - d  # z_l' Z (1 - e_l)
    rest = m2 - 2 * d  # (1 - e_l)' Z (1 - e_l)
    aza = walks - 2 * alpha * cross + alpha**2 * rest
    s1 = 0.5 * ((1 - beta) * (sum_a**2 - sum_a2) - aza)

    sum_c = (1 - beta) * n1 - d
    sum_c2 = (n1 - d) * (1 - beta) ** 2 + d * beta**2
    czc = (1 - beta) ** 2 * rest - 2 * (1 - beta) * cross + walks
    s2 = 0.5 * (czc - alpha * (sum_c**2 - sum_c2))
    h = _kernels.pair_count(p)
    return s1 / h, s2 / h


def _means_fast(z: Graph, schedule: NoiseSchedule):
    d, nbr, walks, m2 = graph_counts(z.adj)
    return means_from_counts(z.p, schedule.alpha, schedule.beta, d, nbr, walks, m2)


def estimate_theta(z: Graph, schedule: NoiseSchedule, method: str = "auto") -> MomentEstimate:
    """Moment estimate of every node parameter from the released graph ``z``.

    ``method`` picks the evaluation route: ``"reference"`` (explicit triple
    loop, for checking), ``"matrix"`` (dense products, any schedule),
    ``"fast"`` (per-node graph counts, constant schedules) or ``"auto"``.
    Nodes whose averages are not both positive get ``theta = NaN`` and
    ``valid = False``.
    """
    _check(z, schedule)
    if method == "auto":
        method = "fast" if schedule.is_constant else "matrix"
    if method == "reference":
        mu1, mu2 = _means_reference(z, schedule)
    elif method == "matrix":
        mu1, mu2 = _means_matrix(z, schedule)
    elif method == "fast":
        if not schedule.is_constant:
            raise ValueError("fast path needs a constant schedule")
        mu1, mu2 = _means_fast(z, schedule)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MomentEstimate.from_means(mu1, mu2)


@dataclass
class VarianceBundle:
    lam: np.ndarray  # lam[i, l]
    varz: np.ndarray
    b: np.ndarray
    btilde: np.ndarray

    @property
    def nu(self) -> np.ndarray:
        p = self.b.shape[0]
        return (p - 2) * self.b + self.btilde


def plugin_variances(z: Graph, schedule: NoiseSchedule, est: MomentEstimate) -> VarianceBundle:
    """Plug-in estimates of the linear-term and cubic-term variances.

    Uses the observed weights with ``est.mu1, est.mu2`` for the linear
    weights and ``est.theta`` in the closed-form pair variance. Nodes flagged
    invalid in ``est`` come out as NaN.
    """
    _check(z, schedule)
    p = z.p
    if est.p != p:
        raise ValueError("estimate does not match graph size")
    mu1 = np.where(est.valid, est.mu1, np.nan)
    mu2 = np.where(est.valid, est.mu2, np.nan)
    theta = est.theta
    phi1, phi0 = phi_matrices(z, schedule)
    g = phi0 @ phi1
    # pairs touching an invalid node are evaluated at theta = 0 for that node
    theta_fill = np.where(est.valid, theta, 0.0)
    varz = _kernels.var_z_matrix(theta_fill, schedule.alpha_matrix(p), schedule.beta_matrix(p))
    lam, b, btilde = _kernels.variance_terms(g, mu1, mu2, varz)
    b[~est.valid] = np.nan
    btilde[~est.valid] = np.nan
    return VarianceBundle(lam, varz, b, btilde)


def write_estimates(est: MomentEstimate, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "theta_hat", "mu1", "mu2", "status"])
        for k in range(est.p):
            w.writerow([k, repr(float(est.theta[k])), repr(float(est.mu1[k])),
                        repr(float(est.mu2[k])), OK if est.valid[k] else NONPOSITIVE_MU])


def read_estimates(path: str | Path) -> MomentEstimate:
    rows = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        for row in r:
            rows.append(row)
    mu1 = np.array([float(r["mu1"]) for r in rows])
    mu2 = np.array([float(r["mu2"]) for r in rows])
    return MomentEstimate.from_means(mu1, mu2)


def write_variances(vb: VarianceBundle, path: str | Path) -> None:
    nu = vb.nu
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "b_hat", "btilde_hat", "nu_hat"])
        for k in range(nu.shape[0]):
            w.writerow([k, repr(float(vb.b[k])), repr(float(vb.btilde[k])), repr(float(nu[k]))])
