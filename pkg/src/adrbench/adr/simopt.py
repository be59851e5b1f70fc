"""Trajectory-discrepancy inference with a relative-entropy trust region.

Each iteration collects one target trajectory with the currently trained
policy, then refines the source distribution by repeatedly sampling dynamics
parameters, re-rolling the same policy in simulation from the recorded
initial state, and reweighting toward low observation discrepancy under the
KL trust region. The single-iteration variant spends the whole update budget
after the first (and only) collection.
"""

from __future__ import annotations

import logging

import numpy as np

from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.replay import closed_loop_obs
from adrbench.adr.scenario import Scenario
from adrbench.dist import NORMALIZED_HI, NORMALIZED_LO, clamp_rate, prior, sample
from adrbench.optim.reps import RepsConfig, reps_update
from adrbench.policy import Policy, TrainerConfig, train_policy
from adrbench.trajectory import Dataset, Trajectory

log = logging.getLogger(__name__)

DIVERGED_STEP_COST = 1e6  # per missing step when nothing completed at all


def _pair_cost(delta: np.ndarray, w1: float, w2: float) -> np.ndarray:
    """Per-step cost over trailing obs axis: w1 * L1 + w2 * squared L2."""
    return w1 * np.sum(np.abs(delta), axis=-1) + w2 * np.sum(delta * delta, axis=-1)


def _discrepancy_from_arrays(
    target_obs: np.ndarray,  # (L_t + 1, n_s) including the initial observation
    sim_obs: np.ndarray,  # (B, L_sim, n_s)
    steps_done: np.ndarray,  # (B,)
    w1: float,
    w2: float,
) -> np.ndarray:
    target_len = target_obs.shape[0] - 1
    batch, sim_len = sim_obs.shape[0], sim_obs.shape[1]
    horizon = min(target_len, sim_len)
    costs = np.zeros(batch)
    for b in range(batch):
        done = min(int(steps_done[b]), horizon)
        completed = _pair_cost(sim_obs[b, :done] - target_obs[1 : done + 1], w1, w2)
        total = float(np.sum(completed))
        missing = target_len - done
        if missing > 0:
            per_step = total / done * 10.0 if done > 0 else DIVERGED_STEP_COST
            total += missing * per_step
        costs[b] = total
    return costs


def simopt_discrepancy(
    traj_target: Trajectory, traj_sim: Trajectory, w1: float = 1.0, w2: float = 1.0
) -> float:
    """Observation discrepancy between two trajectories from the same start.

    Post-action observations are compared stepwise up to the shorter length;
    every missing step (a sim rollout that ended early, e.g. a diverged
    replay) is charged ten times the mean per-step cost of the completed
    steps, keeping the metric finite and monotone in how early the replay
    died.
    """
    if len(traj_target) == 0 or len(traj_sim) == 0:
        raise ValueError("cannot compare empty trajectories")
    sim_obs = traj_sim.obs[1:][None, :, :]
    steps = np.array([len(traj_sim)])
    return float(
        _discrepancy_from_arrays(traj_target.obs, sim_obs, steps, w1, w2)[0]
    )


def run_simopt(
    scenario: Scenario,
    prior_policy: Policy,
    iterations: int,
    reps_config: RepsConfig,
    trainer_config: TrainerConfig,
    rng: np.random.Generator,
    single_iteration: bool = False,
    eval_episodes: int = 10,
    trajectory_len: int = 200,
    seed: int = 0,
    w1: float = 1.0,
    w2: float = 1.0,
) -> AdrOutcome:
    """Online inference loop; returns per-iteration results and, in
    ``extras``, the logged trajectory dataset and the per-update trace.

    ``prior_policy`` is the iteration-0 policy (trained on the conservative
    prior); it collects the first trajectory, so the shared iteration-0
    record and this run agree on provenance.
    """
    method = "simopt1" if single_iteration else "simopt"
    dist = prior(scenario.param_space)
    dataset = Dataset()
    trace: list[dict] = []
    outcome = AdrOutcome(method=method, extras={"dataset": dataset, "trace": trace})

    n_collections = 1 if single_iteration else iterations
    total_updates = reps_config.updates_per_iteration * iterations
    policy = prior_policy
    for it in range(1, n_collections + 1):
        traj = scenario.collect_target_trajectory(
            policy,
            rng,
            trajectory_len,
            strategy="simopt-policy",
            iteration_index=it,
            seed=seed,
            policy_iteration=it - 1,
        )
        dataset.append(traj)
        updates = total_updates if single_iteration else reps_config.updates_per_iteration
        for upd in range(1, updates + 1):
            z = sample(dist, rng, clamp=False, size=reps_config.samples_per_update)
            z_sim = np.clip(z, NORMALIZED_LO, NORMALIZED_HI)
            xis = scenario.embed(z_sim)
            sim_obs, steps_done = closed_loop_obs(
                scenario.spec, policy, traj.states[0], xis, len(traj)
            )
            costs = _discrepancy_from_arrays(traj.obs, sim_obs, steps_done, w1, w2)
            if not np.any(np.isfinite(costs)):
                log.warning(
                    "simopt %s iteration %d update %d: all samples diverged; skipped",
                    scenario.spec.name,
                    it,
                    upd,
                )
                continue
            dist, info = reps_update(dist, z, costs, reps_config)
            trace.append(
                {
                    "iteration": it,
                    "update": upd,
                    "eta": info["eta"],
                    "mean_cost": info["mean_cost"],
                    "weighted_cost": info.get("weighted_cost"),
                    "clamp_rate": clamp_rate(z),
                }
            )
        child = rng.spawn(1)[0]
        result = train_policy(
            dist,
            scenario.spec,
            trainer_config,
            rng=child,
            param_space=scenario.param_space,
            embed=scenario.embed,
        )
        policy = result.policy
        ret = scenario.evaluate_on_target(policy, eval_episodes, rng)
        outcome.iterations.append(
            IterationResult(
                iteration=it,
                inferred=dist,
                policy=policy,
                raw_return=ret,
                transitions_used=scenario.budget_used,
            )
        )
    return outcome
