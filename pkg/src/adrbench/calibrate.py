"""Reward-threshold calibration.

Regenerates the constants shipped in ``default_config.yaml``: for each
environment, train on ground-truth dynamics, take the converged return, and
set the threshold 90% of the way from the zero-action reference to it (for
positive-scale rewards with a ~0 reference this is simply 90% of the
converged return). Run as ``python -m adrbench.calibrate [env ...]``.
"""

from __future__ import annotations

import argparse

import numpy as np

from adrbench.config import build_trainer_config, build_spec, load_config
from adrbench.dist import ParamSpace, normalize, uniform
from adrbench.envs import core as envs
from adrbench.policy import TrainerConfig, evaluate_policy, train_policy


def zero_action_return(spec: envs.EnvironmentSpec, episodes: int, rng) -> float:
    """Mean return of a do-nothing policy; the pendulum's normalization anchor."""
    zero = lambda obs: np.zeros(spec.n_a)  # noqa: E731
    total = 0.0
    for _ in range(episodes):
        traj = envs.rollout(spec, zero, spec.ground_truth_xi.values, spec.episode_len, rng)
        total += traj.total_reward
    return total / episodes


def calibrate_environment(
    spec: envs.EnvironmentSpec,
    trainer: TrainerConfig,
    seeds=(1, 2, 3),
    eval_episodes: int = 20,
) -> dict:
    """Converged return on ground truth (median over seeds) and derived threshold."""
    space = ParamSpace(spec.search_space)
    z_gt = normalize(spec.ground_truth_xi.values, space)
    point = uniform(z_gt, z_gt)
    returns = []
    for seed in seeds:
        result = train_policy(point, spec, trainer, rng=np.random.default_rng(seed))
        ret = evaluate_policy(
            result.policy, spec, spec.ground_truth_xi.values, eval_episodes,
            np.random.default_rng(seed + 1000),
        )
        returns.append(ret)
    converged = float(np.median(returns))
    worst = zero_action_return(spec, 100, np.random.default_rng(0))
    threshold = worst + 0.9 * (converged - worst)
    return {
        "env": spec.name,
        "returns_per_seed": returns,
        "converged_return": converged,
        "zero_action_return": worst,
        "suggested_threshold": threshold,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("envs", nargs="*", default=["pendulum", "cartpole", "acrobot"])
    args = parser.parse_args(argv)
    config = load_config()
    for name in args.envs or ["pendulum", "cartpole", "acrobot"]:
        spec = build_spec(name, config)
        trainer = build_trainer_config(config, name, reward_threshold=np.inf)
        info = calibrate_environment(spec, trainer)
        print(
            f"{info['env']:9s} converged={info['converged_return']:9.2f} "
            f"zero-action={info['zero_action_return']:9.2f} "
            f"threshold={info['suggested_threshold']:9.2f} "
            f"(per-seed {['%.1f' % r for r in info['returns_per_seed']]})"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
