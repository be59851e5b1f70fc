"""Bayesian-optimization adaptation of uniform randomization bounds.

A Gaussian process over the stacked (lo, hi) bound vector is seeded with the
random-search results and maximizes the measured target return directly: no
sensor trace is used, only reward evaluation on the target. Each iteration
suggests new bounds by expected improvement, trains a policy on them, and
measures its target return; the reported answer is the best observation so
far (which by construction can never fall below the seeding results).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.scenario import Scenario
from adrbench.dist import NORMALIZED_HI, NORMALIZED_LO, uniform
from adrbench.optim.gp import GpHyper, bo_suggest, gp_fit
from adrbench.policy import TrainerConfig, train_policy

GP_DIM_LIMIT = 8  # GPs scale poorly past this many dynamics parameters


class BayrnDimensionalityError(ValueError):
    """Parameter space too high-dimensional for GP-based return optimization."""


@dataclass(frozen=True)
class BayrnConfig:
    eval_episodes: int = 5
    gp_length_scale: float = 1.0
    gp_noise_factor: float = 1e-4
    bo_starts: int = 256


def run_bayrn(
    scenario: Scenario,
    udr_outcome: AdrOutcome,
    iterations: int,
    trainer_config: TrainerConfig,
    rng: np.random.Generator,
    config: BayrnConfig | None = None,
    trajectory_len: int = 200,
) -> AdrOutcome:
    config = config or BayrnConfig()
    n = scenario.n_params
    if n >= GP_DIM_LIMIT:
        raise BayrnDimensionalityError(
            f"{scenario.spec.name}: {n} dynamics parameters; GP return optimization "
            f"is limited to fewer than {GP_DIM_LIMIT}"
        )
    seeds = udr_outcome.extras["configs"]
    X = [np.concatenate([c["dist"].lo, c["dist"].hi]) for c in seeds]
    y = [c["target_return"] for c in seeds]
    observations = [
        {"bounds": x, "target_return": ret, "policy": c["policy"]}
        for x, ret, c in zip(X, y, seeds)
    ]
    box = np.tile([[NORMALIZED_LO, NORMALIZED_HI]], (2 * n, 1))

    outcome = AdrOutcome(method="bayrn")
    for it in range(1, iterations + 1):
        X_arr = np.asarray(X)
        y_arr = np.asarray(y)
        y_sd = float(np.std(y_arr))
        y_std = (y_arr - y_arr.mean()) / y_sd if y_sd > 0 else np.zeros_like(y_arr)
        hyper = GpHyper(
            length_scales=np.full(2 * n, config.gp_length_scale),
            signal_variance=1.0,
            noise_variance=config.gp_noise_factor,
        )
        model = gp_fit(X_arr, y_std, hyper)
        x_next = bo_suggest(model, box, rng, n_starts=config.bo_starts)
        lo, hi = x_next[:n].copy(), x_next[n:].copy()
        swap = lo > hi
        lo[swap], hi[swap] = hi[swap], lo[swap]
        dist = uniform(lo, hi)

        child = rng.spawn(1)[0]
        result = train_policy(
            dist,
            scenario.spec,
            trainer_config,
            rng=child,
            param_space=scenario.param_space,
            embed=scenario.embed,
        )
        ret = scenario.evaluate_on_target(result.policy, config.eval_episodes, rng)
        # the return measurement is the method's data collection: one
        # trajectory's worth of budget per iteration
        scenario.charge_budget(trajectory_len)
        X.append(np.concatenate([lo, hi]))
        y.append(ret)
        observations.append({"bounds": X[-1], "target_return": ret, "policy": result.policy})

        best = max(observations, key=lambda o: o["target_return"])
        best_lo, best_hi = best["bounds"][:n], best["bounds"][n:]
        outcome.iterations.append(
            IterationResult(
                iteration=it,
                inferred=uniform(best_lo, best_hi),
                policy=best["policy"],
                raw_return=float(best["target_return"]),
                transitions_used=it * trajectory_len,
            )
        )
    outcome.extras["observations"] = observations
    return outcome
