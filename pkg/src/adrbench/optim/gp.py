"""Exact Gaussian-process regression with a squared-exponential kernel,
plus expected improvement and a multi-start acquisition maximizer.

Hyperparameters are fixed per fit (no marginal-likelihood optimization):
with the handful of observations available per inference run, optimizing
them is less stable than pinning a unit length-scale in normalized units
and scaling the signal to the observed output variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

JITTERS = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class GpHyper:
    length_scales: np.ndarray  # (n,) or scalar broadcast
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if np.any(ls <= 0) or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("GP hyperparameters must be positive (noise may be zero)")
        object.__setattr__(self, "length_scales", ls)


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray  # (m, n)
    y: np.ndarray  # (m,)
    hyper: GpHyper
    chol: tuple
    alpha: np.ndarray


def _kernel(hyper: GpHyper, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a[:, None, :] - b[None, :, :]) / hyper.length_scales
    return hyper.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))


def gp_fit(X: np.ndarray, y: np.ndarray, hyper: GpHyper) -> GpModel:
    """Fit the exact GP; escalates diagonal jitter if the kernel matrix is
    numerically singular, and raises once 1e-6 is not enough."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValueError("need |X| == |y| >= 1")
    K = _kernel(hyper, X, X) + hyper.noise_variance * np.eye(X.shape[0])
    last_exc: Exception | None = None
    for jitter in JITTERS:
        try:
            chol = cho_factor(K + jitter * np.eye(X.shape[0]), lower=True)
            alpha = cho_solve(chol, y)
            return GpModel(X=X, y=y, hyper=hyper, chol=chol, alpha=alpha)
        except np.linalg.LinAlgError as exc:
            last_exc = exc
    raise np.linalg.LinAlgError(
        f"kernel matrix not positive-definite even with jitter {JITTERS[-1]}"
    ) from last_exc


def gp_posterior(model: GpModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (non-negative) latent variance at query points.

    Accepts (n,) or (q, n); returns matching scalars or (q,) arrays.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xq = np.atleast_2d(x)
    k_star = _kernel(model.hyper, xq, model.X)  # (q, m)
    mean = k_star @ model.alpha
    v = cho_solve(model.chol, k_star.T)  # (m, q)
    var = model.hyper.signal_variance - np.sum(k_star * v.T, axis=1)
    var = np.maximum(var, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def expected_improvement(model: GpModel, x: np.ndarray, best_y: float) -> float | np.ndarray:
    """Closed-form EI for maximization: E[max(f(x) - best_y, 0)].

    A zero-variance posterior degenerates to the deterministic improvement
    max(mean - best_y, 0).
    """
    mean, var = gp_posterior(model, x)
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    improve = mean - best_y
    z = np.divide(improve, sd, out=np.zeros_like(mean), where=sd > 0)
    ei = np.where(sd > 0, improve * norm.cdf(z) + sd * norm.pdf(z), np.maximum(improve, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def bo_suggest(
    model: GpModel,
    bounds: np.ndarray,
    rng: np.random.Generator,
    n_starts: int = 256,
) -> np.ndarray:
    """Maximize EI by local search (L-BFGS-B) from random starts in the box."""
    bounds = np.asarray(bounds, dtype=float)
    n = bounds.shape[0]
    best_y = float(np.max(model.y))
    starts = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n_starts, n))
    ei0 = expected_improvement(model, starts, best_y)
    order = np.argsort(-ei0)[: max(8, n_starts // 16)]  # refine the promising starts

    def neg_ei(x):
        return -expected_improvement(model, x, best_y)

    best_x, best_val = starts[order[0]], -float(ei0[order[0]])
    for idx in order:
        res = optimize.minimize(
            neg_ei, starts[idx], method="L-BFGS-B", bounds=bounds, options={"maxiter": 60}
        )
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x
    return np.clip(best_x, bounds[:, 0], bounds[:, 1])
