"""Covariance matrix adaptation evolution strategy, (mu/mu_w, lambda) variant.

Standard rank-one plus rank-mu updates with cumulative step-size adaptation
and the usual log-linear recombination weights. Kept dependency-free (numpy
only) so the search state stays inspectable: the adapted (mean, sigma^2 C)
is itself the output distribution of some inference methods, and its
collapse to near-zero variance is a reportable benchmark behavior -- hence
no variance floor here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

_RESAMPLE_TRIES = 100


@dataclass
class CmaState:
    """Search-distribution state: x ~ mean + sigma * N(0, C)."""

    mean: np.ndarray
    sigma: float
    C: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int = 0
    lam: int = 0
    evaluations: int = 0

    @property
    def diag_variance(self) -> np.ndarray:
        """Per-dimension variance of the search distribution, sigma^2 * diag(C)."""
        return self.sigma**2 * np.diag(self.C)


@dataclass
class _Weights:
    """Selection weights and learning rates for dimension n, population lam."""

    lam: int
    mu: int
    w: np.ndarray
    mu_eff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float
    chi_n: float

    @classmethod
    def defaults(cls, n: int, lam: int) -> "_Weights":
        mu = lam // 2
        raw = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
        w = raw / raw.sum()
        mu_eff = 1.0 / np.sum(w**2)
        cc = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
        cs = (mu_eff + 2) / (n + mu_eff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mu_eff)
        cmu = min(1 - c1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
        damps = 1 + 2 * max(0.0, np.sqrt((mu_eff - 1) / (n + 1)) - 1) + cs
        chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))
        return cls(lam, mu, w, mu_eff, cc, cs, c1, cmu, damps, chi_n)


def default_population(n: int) -> int:
    return 4 + int(3 * np.log(n))


@dataclass
class CmaResult:
    best_x: np.ndarray
    best_f: float
    state: CmaState
    trace: list[dict] = field(default_factory=list)


def cmaes_minimize(
    objective,
    x0: np.ndarray,
    sigma0: float,
    rng: np.random.Generator,
    lam: int | None = None,
    max_evals: int = 10_000,
    bounds: np.ndarray | None = None,
    vectorized: bool = False,
    trace: list | None = None,
) -> CmaResult:
    """Minimize a black-box objective within an exact evaluation budget.

    Runs full generations while the remaining budget allows one, so the
    number of evaluations never exceeds ``max_evals``. ``bounds`` (n, 2)
    constrains samples by resampling (up to 100 tries per point), then
    clamping. Non-finite objective values are replaced by the worst finite
    value in their generation, so diverged replays cannot poison the update.
    With ``vectorized`` the objective receives the (lam, n) population and
    must return (lam,) values.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    n = x0.shape[0]
    lam = lam if lam is not None else default_population(n)
    par = _Weights.defaults(n, lam)
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float).reshape(n, 2)

    state = CmaState(
        mean=x0.copy(),
        sigma=float(sigma0),
        C=np.eye(n),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
        lam=lam,
    )
    best_x = x0.copy()
    best_f = np.inf

    while state.evaluations + lam <= max_evals:
        eigvals, eigvecs = np.linalg.eigh(state.C)
        eigvals = np.maximum(eigvals, 1e-30)
        sqrt_c = eigvecs * np.sqrt(eigvals)  # C^(1/2) columns
        inv_sqrt_c = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T

        z = rng.standard_normal((lam, n))
        x = state.mean + state.sigma * z @ sqrt_c.T
        if bounds is not None:
            for _ in range(_RESAMPLE_TRIES):
                outside = np.any((x < bounds[:, 0]) | (x > bounds[:, 1]), axis=1)
                if not np.any(outside):
                    break
                z_new = rng.standard_normal((int(outside.sum()), n))
                x[outside] = state.mean + state.sigma * z_new @ sqrt_c.T
            x = np.clip(x, bounds[:, 0], bounds[:, 1])

        if vectorized:
            f = np.asarray(objective(x), dtype=float)
        else:
            f = np.array([float(objective(xi)) for xi in x])
        state.evaluations += lam

        finite = np.isfinite(f)
        if not np.all(finite):
            worst = np.max(f[finite]) if np.any(finite) else 0.0
            f = np.where(finite, f, worst)
        order = np.argsort(f, kind="stable")
        x_sorted = x[order]
        if f[order[0]] < best_f:
            best_f = float(f[order[0]])
            best_x = x_sorted[0].copy()

        old_mean = state.mean
        selected = x_sorted[: par.mu]
        state.mean = par.w @ selected

        y = (state.mean - old_mean) / state.sigma
        state.p_sigma = (1 - par.cs) * state.p_sigma + np.sqrt(
            par.cs * (2 - par.cs) * par.mu_eff
        ) * (inv_sqrt_c @ y)
        gen = state.generation + 1
        hsig = float(
            np.sum(state.p_sigma**2)
            / (1 - (1 - par.cs) ** (2 * gen))
            / n
            < 2 + 4 / (n + 1)
        )
        state.p_c = (1 - par.cc) * state.p_c + hsig * np.sqrt(
            par.cc * (2 - par.cc) * par.mu_eff
        ) * y

        dy = (selected - old_mean) / state.sigma
        rank_mu = (dy.T * par.w) @ dy
        c1a = par.c1 * (1 - (1 - hsig**2) * par.cc * (2 - par.cc))
        state.C = (
            (1 - c1a - par.cmu) * state.C
            + par.c1 * np.outer(state.p_c, state.p_c)
            + par.cmu * rank_mu
        )
        state.C = 0.5 * (state.C + state.C.T)

        state.sigma *= float(
            np.exp(
                (par.cs / par.damps)
                * (np.linalg.norm(state.p_sigma) / par.chi_n - 1)
            )
        )
        state.generation = gen
        if trace is not None:
            trace.append(
                {
                    "generation": gen,
                    "evaluations": state.evaluations,
                    "best_f": best_f,
                    "sigma": state.sigma,
                    "mean": state.mean.tolist(),
                }
            )

    if state.generation == 0:
        log.warning("cmaes_minimize: budget %d below one generation (lam=%d)", max_evals, lam)
    return CmaResult(best_x=best_x, best_f=best_f, state=state, trace=trace or [])
