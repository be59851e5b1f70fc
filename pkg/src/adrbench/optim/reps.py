"""Relative-entropy-constrained reweighting of a diagonal Gaussian.

Given samples from the current distribution and their costs, find the
temperature eta minimizing the dual

    g(eta) = eta * kl_bound + eta * log( mean_i exp(-cost_i / eta) )

whose stationarity condition is KL(weights || uniform) = kl_bound. Weights
w_i proportional to exp(-cost_i / eta) then define a weighted maximum-
likelihood refit of the Gaussian. The KL bound acts as the trust region that
keeps successive search distributions close.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from adrbench.dist import DomainDistribution, gaussian, kl_gaussian

log = logging.getLogger(__name__)

ETA_MIN = 1e-8
ETA_MAX = 1e8
ETA_REL_TOL = 1e-10
VARIANCE_FLOOR = 1e-6  # normalized units; keeps the randomization alive


@dataclass(frozen=True)
class RepsConfig:
    kl_bound: float = 1.0
    samples_per_update: int = 1000
    updates_per_iteration: int = 5

    def __post_init__(self):
        if self.kl_bound <= 0 or self.samples_per_update <= 0 or self.updates_per_iteration <= 0:
            raise ValueError("RepsConfig fields must be positive")


def weight_kl(costs: np.ndarray, eta: float) -> float:
    """KL between the exponentially tilted weights and the uniform weights."""
    s = -(costs - costs.min()) / eta
    lme = _logmeanexp(s)
    w = np.exp(s - lme) / len(costs)  # tilted weights, sum to 1
    contrib = np.where(w > 0, w * (s - lme), 0.0)
    return float(np.sum(contrib))


def _logmeanexp(a: np.ndarray) -> float:
    m = np.max(a)
    return float(m + np.log(np.mean(np.exp(a - m))))


def solve_dual(costs: np.ndarray, kl_bound: float) -> float:
    """Temperature at which the tilted-weight KL meets the bound.

    The KL is monotone decreasing in eta, so this bisects the stationarity
    condition; when even the extreme temperatures keep the KL on one side,
    the corresponding bracket endpoint is returned (boundary optimum of the
    convex dual).
    """
    lo, hi = ETA_MIN, ETA_MAX
    if weight_kl(costs, lo) <= kl_bound:
        return lo
    if weight_kl(costs, hi) >= kl_bound:
        return hi
    while (hi - lo) / hi > ETA_REL_TOL:
        mid = np.sqrt(lo * hi)  # bisect in log space; eta spans 16 decades
        if weight_kl(costs, mid) > kl_bound:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def reps_weights(costs: np.ndarray, eta: float) -> np.ndarray:
    """Normalized non-negative weights, monotone non-increasing in cost."""
    shifted = (costs - costs.min()) / eta
    w = np.exp(-shifted)
    return w / w.sum()


def reps_update(
    dist: DomainDistribution,
    samples: np.ndarray,
    costs: np.ndarray,
    config: RepsConfig,
) -> tuple[DomainDistribution, dict]:
    """One trust-region update; returns (new distribution, diagnostics).

    Non-finite costs are dropped before the dual solve (a diverged replay
    carries no information beyond its absence); if nothing survives, the
    distribution is returned unchanged with a warning.
    """
    if dist.variant != "gaussian":
        raise ValueError("reps_update operates on diagonal Gaussians")
    samples = np.asarray(samples, dtype=float)
    costs = np.asarray(costs, dtype=float).ravel()
    if samples.shape[0] != costs.shape[0]:
        raise ValueError("samples and costs must align")
    if costs.shape[0] != config.samples_per_update:
        raise ValueError(
            f"expected {config.samples_per_update} samples, got {costs.shape[0]}"
        )

    finite = np.isfinite(costs) & np.all(np.isfinite(samples), axis=1)
    if not np.any(finite):
        log.warning("reps_update: every sample diverged; distribution unchanged")
        return dist, {"eta": np.nan, "n_used": 0, "mean_cost": np.nan}
    samples, costs = samples[finite], costs[finite]

    def refit(eta):
        w = reps_weights(costs, eta)
        mean = w @ samples
        var = np.maximum(w @ ((samples - mean) ** 2), VARIANCE_FLOOR)
        return gaussian(mean, var), w

    eta = solve_dual(costs, config.kl_bound)
    new, w = refit(eta)
    if kl_gaussian(new, dist) > config.kl_bound:
        # The dual bounds the KL of the tilted weights; the moment-projected
        # Gaussian can overshoot it slightly when the variance shrinks hard.
        # The trust region is the contract, so enlarge the temperature until
        # the parametric KL is back inside the bound (KL decreases in eta).
        lo, hi = eta, ETA_MAX
        for _ in range(200):
            mid = np.sqrt(lo * hi)
            cand, _ = refit(mid)
            if kl_gaussian(cand, dist) > config.kl_bound:
                lo = mid
            else:
                hi = mid
            if (hi - lo) / hi < ETA_REL_TOL:
                break
        eta = hi
        new, w = refit(eta)
    info = {
        "eta": float(eta),
        "n_used": int(costs.shape[0]),
        "mean_cost": float(np.mean(costs)),
        "weighted_cost": float(w @ costs),
    }
    return new, info
