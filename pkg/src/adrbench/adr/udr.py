"""Uniform domain randomization baseline: a random search over uniform bounds.

Trains one policy per randomly sampled bound pair and reports the average
target return, standing in for manually tuned static randomization. Consumes
no target transitions beyond final evaluation.
"""

from __future__ import annotations

import numpy as np

from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.scenario import Scenario
from adrbench.dist import NORMALIZED_HI, NORMALIZED_LO, uniform
from adrbench.policy import TrainerConfig, train_policy


def sample_uniform_bounds(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """A random (lo, hi) pair per dimension, each endpoint uniform in [0, 4]."""
    draws = rng.uniform(NORMALIZED_LO, NORMALIZED_HI, size=(2, n))
    return draws.min(axis=0), draws.max(axis=0)


def run_udr(
    scenario: Scenario,
    n_configs: int,
    trainer_config: TrainerConfig,
    rng: np.random.Generator,
    eval_episodes: int = 10,
) -> AdrOutcome:
    if n_configs < 1:
        raise ValueError("n_configs must be >= 1")
    n = scenario.n_params
    configs = []
    for idx in range(n_configs):
        lo, hi = sample_uniform_bounds(n, rng)
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
        ret = scenario.evaluate_on_target(result.policy, eval_episodes, rng)
        configs.append(
            {"index": idx, "dist": dist, "policy": result.policy, "target_return": ret}
        )
    mean_return = float(np.mean([c["target_return"] for c in configs]))
    record = IterationResult(
        iteration=1,
        inferred=None,
        policy=None,
        raw_return=mean_return,
        transitions_used=0,
    )
    return AdrOutcome(method="udr", iterations=[record], extras={"configs": configs})
