"""Offline inference by open-loop action replay.

Recorded action sequences are executed in simulation from each trajectory's
recorded initial state; the summed squared observation error is minimized
over dynamics parameters with CMA-ES. The returned distribution is the
optimizer's own final search distribution (mean, sigma^2 diag C) with no
variance floor: its collapse to near-zero variance after convergence is an
expected, measurable behavior of this method.
"""

from __future__ import annotations

import numpy as np

from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.replay import open_loop_obs
from adrbench.adr.scenario import Scenario
from adrbench.dist import NORMALIZED_HI, NORMALIZED_LO, gaussian
from adrbench.optim.cmaes import cmaes_minimize
from adrbench.policy import TrainerConfig, train_policy
from adrbench.trajectory import Dataset

MISSING_STEP_FACTOR = 10.0
DIVERGED_STEP_COST = 1e6


def droid_cost_batch(
    dataset: Dataset, xis: np.ndarray, spec
) -> np.ndarray:
    """Summed squared observation error of the open-loop replay, per candidate.

    Diverged replays (non-finite simulation) stop accumulating and are
    charged ten times their mean completed per-step cost for every missing
    step, so the objective stays finite everywhere.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    costs = np.zeros(xis.shape[0])
    for traj in dataset.trajectories:
        sim_obs, steps_done = open_loop_obs(spec, traj, xis)
        target = traj.obs[1:]  # post-action observations
        length = len(traj)
        for b in range(xis.shape[0]):
            done = int(steps_done[b])
            delta = sim_obs[b, :done] - target[:done]
            total = float(np.sum(delta * delta))
            missing = length - done
            if missing > 0:
                per_step = (
                    total / done * MISSING_STEP_FACTOR if done > 0 else DIVERGED_STEP_COST
                )
                total += missing * per_step
            costs[b] += total
    return costs


def droid_cost(dataset: Dataset, xi: np.ndarray, spec) -> float:
    """Replay cost of a single physical parameter vector over the dataset."""
    return float(droid_cost_batch(dataset, np.asarray(xi)[None, :], spec)[0])


def run_droid(
    scenario: Scenario,
    dataset: Dataset,
    cma_budget: int,
    trainer_config: TrainerConfig,
    rng: np.random.Generator,
    eval_episodes: int = 10,
    sigma0: float = 1.0,
) -> AdrOutcome:
    n = scenario.n_params
    bounds = np.tile([[NORMALIZED_LO, NORMALIZED_HI]], (n, 1))
    trace: list[dict] = []

    def objective(z_batch: np.ndarray) -> np.ndarray:
        return droid_cost_batch(dataset, scenario.embed(z_batch), scenario.spec)

    result = cmaes_minimize(
        objective,
        x0=np.full(n, 2.0),
        sigma0=sigma0,
        rng=rng,
        max_evals=cma_budget,
        bounds=bounds,
        vectorized=True,
        trace=trace,
    )
    # final search distribution, deliberately unfloored (1e-30 only keeps the
    # variance type-valid, it is zero for randomization purposes)
    diag = np.maximum(result.state.diag_variance, 1e-30)
    dist = gaussian(result.state.mean, diag)

    child = rng.spawn(1)[0]
    trained = train_policy(
        dist,
        scenario.spec,
        trainer_config,
        rng=child,
        param_space=scenario.param_space,
        embed=scenario.embed,
    )
    ret = scenario.evaluate_on_target(trained.policy, eval_episodes, rng)
    record = IterationResult(
        iteration=len(dataset),
        inferred=dist,
        policy=trained.policy,
        raw_return=ret,
        transitions_used=dataset.total_transitions,
    )
    return AdrOutcome(
        method="droid",
        iterations=[record],
        extras={"trace": trace, "best_cost": result.best_f, "best_z": result.best_x},
    )
