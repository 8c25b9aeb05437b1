"""Fuzzy rule extraction and rule firing.

Rules are Gaussian antecedents over the input space. Centers come from fuzzy
c-means on the training inputs; widths are membership-weighted standard
deviations per dimension, floored to keep the exponentials well conditioned.
Fire strengths are normalized in log space so that products of many Gaussian
memberships cannot underflow to an all-zero rule vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError

# Width floor: 1e-3 of the dimension's training range, 1e-6 absolute if the
# range is zero. Keeps (u - c) / sigma bounded for coincident points.
WIDTH_RANGE_FLOOR = 1e-3
WIDTH_ABS_FLOOR = 1e-6


@dataclass(frozen=True)
class FcmConfig:
    """Fuzzy c-means settings: fuzziness exponent, iteration cap, tolerance."""

    m: float = 2.0
    max_iter: int = 300
    tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError("fuzziness exponent m must be > 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class FuzzyRuleBank:
    """Q Gaussian rules: centers and strictly positive widths, both Q x K."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        widths = np.atleast_2d(np.asarray(self.widths, dtype=float))
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "widths", widths)
        if centers.shape != widths.shape:
            raise ValueError("centers and widths must have the same shape")
        if centers.shape[0] < 1:
            raise ValueError("need at least one rule")
        if not (widths > 0).all():
            raise ValueError("all widths must be strictly positive")

    @property
    def n_rules(self) -> int:
        return self.centers.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]


def _memberships(points: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    """FCM membership matrix, Q x n.

    mu_ij is proportional to (1 / d_ij^2)^(1/(m-1)), normalized over clusters.
    A point at zero distance from one or more centers gets its membership
    split over the coincident centers (1 when unique).
    """
    # d2[i, j] = squared distance of point j to center i
    d2 = ((points[None, :, :] - centers[:, :, None]) ** 2).sum(axis=1)
    mu = np.zeros_like(d2)
    zero = d2 <= 0.0
    coincident = zero.any(axis=0)
    reg = np.where(d2 > 0, d2, 1.0) ** (-1.0 / (m - 1.0))
    cols = ~coincident
    mu[:, cols] = reg[:, cols] / reg[:, cols].sum(axis=0, keepdims=True)
    if coincident.any():
        hits = zero[:, coincident]
        mu[:, coincident] = hits / hits.sum(axis=0, keepdims=True)
    return mu


def fcm_objective(points: np.ndarray, centers: np.ndarray, mu: np.ndarray, m: float) -> float:
    """The FCM cost sum_ij mu_ij^m * ||x_j - c_i||^2."""
    d2 = ((points[None, :, :] - centers[:, :, None]) ** 2).sum(axis=1)
    return float(((mu**m) * d2).sum())


def run_fcm(inputs: np.ndarray, q: int, cfg: FcmConfig):
    """Low-level FCM: returns (centers, memberships, objective trace).

    Alternates the membership and center updates until the largest center
    displacement drops below cfg.tol or the iteration cap is hit. Centers are
    initialized from q distinct random training points under cfg.seed.
    """
    points = np.atleast_2d(np.asarray(inputs, dtype=float))  # K x n
    n = points.shape[1]
    if q < 1:
        raise ValueError("q must be >= 1")
    if q > n:
        raise ValueError(f"cannot extract {q} rules from {n} samples")
    distinct = np.unique(points, axis=1)
    if distinct.shape[1] < q:
        raise DegenerateDataError(
            f"only {distinct.shape[1]} distinct input points; cannot form {q} clusters"
        )

    rng = np.random.default_rng(cfg.seed)
    # seed centers from q distinct sample points
    order = rng.permutation(distinct.shape[1])[:q]
    centers = distinct[:, order].T.copy()  # q x K

    trace = []
    for _ in range(cfg.max_iter):
        mu = _memberships(points, centers, cfg.m)
        trace.append(fcm_objective(points, centers, mu, cfg.m))
        w = mu**cfg.m
        denom = w.sum(axis=1)
        new_centers = np.where(
            denom[:, None] > 0, (w @ points.T) / np.where(denom > 0, denom, 1.0)[:, None], centers
        )
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < cfg.tol:
            break
    mu = _memberships(points, centers, cfg.m)
    trace.append(fcm_objective(points, centers, mu, cfg.m))
    return centers, mu, trace


def fit_fcm(inputs: np.ndarray, q: int, cfg: FcmConfig | None = None) -> FuzzyRuleBank:
    """Cluster training inputs into q fuzzy rules with data-driven widths."""
    cfg = cfg or FcmConfig()
    points = np.atleast_2d(np.asarray(inputs, dtype=float))
    centers, mu, _ = run_fcm(points, q, cfg)

    dim_range = points.max(axis=1) - points.min(axis=1)
    floor = np.where(dim_range > 0, WIDTH_RANGE_FLOOR * dim_range, WIDTH_ABS_FLOOR)
    widths = np.empty_like(centers)
    for i in range(q):
        w = mu[i]
        total = w.sum()
        if total <= 0:
            widths[i] = floor
            continue
        var = (w * (points - centers[i][:, None]) ** 2).sum(axis=1) / total
        widths[i] = np.maximum(np.sqrt(var), floor)
    return FuzzyRuleBank(centers=centers, widths=widths)


def log_fire_strengths(bank: FuzzyRuleBank, u: np.ndarray) -> np.ndarray:
    """Unnormalized log fire strengths for one input vector (length Q)."""
    u = np.asarray(u, dtype=float).ravel()
    z = (u[None, :] - bank.centers) / bank.widths
    return -(z**2).sum(axis=1)


def fire_strengths(bank: FuzzyRuleBank, u: np.ndarray) -> np.ndarray:
    """Normalized fire strengths for one input vector.

    Computed in log space: subtract the max log strength before
    exponentiating, so even inputs thousands of widths from every center
    yield a finite vector that sums to 1.
    """
    log_psi = log_fire_strengths(bank, u)
    stable = np.exp(log_psi - log_psi.max())
    return stable / stable.sum()


def fire_strength_matrix(bank: FuzzyRuleBank, inputs: np.ndarray) -> np.ndarray:
    """Normalized fire strengths for a K x n input matrix; returns Q x n."""
    pts = np.atleast_2d(np.asarray(inputs, dtype=float))
    z = (pts[None, :, :] - bank.centers[:, :, None]) / bank.widths[:, :, None]
    log_psi = -(z**2).sum(axis=1)
    stable = np.exp(log_psi - log_psi.max(axis=0, keepdims=True))
    return stable / stable.sum(axis=0, keepdims=True)
