"""Offline dataset collection strategies.

Offline methods make no assumption about how their data was gathered; the
benchmark exercises three sources: the trajectories an online run already
logged (the default, which guarantees data parity), uniformly random
actions, and a policy trained once on the conservative prior.
"""

from __future__ import annotations

import numpy as np

from adrbench.adr.scenario import Scenario
from adrbench.dist import prior
from adrbench.policy import Policy, TrainerConfig, train_policy
from adrbench.trajectory import Dataset

STRATEGIES = ("simopt-policy", "random", "prior-policy")


class RandomPolicy:
    """Actions drawn uniformly within the bounds, from a dedicated stream."""

    def __init__(self, action_bounds: np.ndarray, rng: np.random.Generator):
        self.bounds = np.asarray(action_bounds, dtype=float)
        self.rng = rng

    def act(self, obs: np.ndarray) -> np.ndarray:
        return self.rng.uniform(self.bounds[:, 0], self.bounds[:, 1])


def collect_offline_dataset(
    scenario: Scenario,
    strategy: str,
    iterations: int,
    rng: np.random.Generator,
    trajectory_len: int = 200,
    simopt_dataset: Dataset | None = None,
    prior_policy: Policy | None = None,
    trainer_config: TrainerConfig | None = None,
    seed: int = 0,
) -> Dataset:
    """One trajectory per iteration, tagged with its collection strategy.

    ``simopt-policy`` reuses the trajectories a completed online run logged
    (no new target interaction); the other strategies roll out fresh
    episodes on the target.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; valid: {STRATEGIES}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    if strategy == "simopt-policy":
        if simopt_dataset is None:
            raise ValueError(
                "simopt-policy strategy requires the dataset of a completed online run"
            )
        if len(simopt_dataset) < iterations:
            raise ValueError(
                f"online run logged {len(simopt_dataset)} trajectories, need {iterations}"
            )
        return simopt_dataset.subset(iterations)

    if strategy == "random":
        policy = RandomPolicy(scenario.spec.action_bounds, rng.spawn(1)[0])
    else:  # prior-policy
        policy = prior_policy
        if policy is None:
            if trainer_config is None:
                raise ValueError("prior-policy strategy needs prior_policy or trainer_config")
            result = train_policy(
                prior(scenario.param_space),
                scenario.spec,
                trainer_config,
                rng=rng.spawn(1)[0],
                param_space=scenario.param_space,
                embed=scenario.embed,
            )
            policy = result.policy

    dataset = Dataset()
    for it in range(1, iterations + 1):
        traj = scenario.collect_target_trajectory(
            policy,
            rng,
            trajectory_len,
            strategy=strategy,
            iteration_index=it,
            seed=seed,
            policy_iteration=None,
        )
        dataset.append(traj)
    return dataset
