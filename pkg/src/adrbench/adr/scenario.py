"""Setting-specific plumbing shared by every inference method.

A scenario binds an environment to one of the three benchmark settings:

* ``vanilla``   -- target equals the simulator at ground-truth parameters;
* ``noisy``     -- target measurements carry Gaussian noise of the
  environment's configured variance;
* ``unmodeled`` -- a subset of parameters is dropped from inference and the
  source simulator runs them at 80% of their true value, while the target
  keeps the full ground truth.

The scenario also owns the two target-interaction counters: physically
executed target transitions (used to assert that offline methods never roll
out on the target) and the budgeted transition account used by the protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from adrbench.dist import ParamSpace, denormalize
from adrbench.envs import core as envs
from adrbench.policy import Policy, evaluate_policy
from adrbench.trajectory import Trajectory

SETTINGS = ("vanilla", "noisy", "unmodeled")


@dataclass
class Scenario:
    spec: envs.EnvironmentSpec
    setting: str
    param_space: ParamSpace = field(init=False)
    modeled_indices: tuple[int, ...] = field(init=False)
    frozen_xi: np.ndarray | None = field(init=False)
    target_noise: float = field(init=False)
    target_transitions: int = 0  # physical target steps collected for inference
    eval_transitions: int = 0  # physical target steps spent on evaluation
    budget_used: int = 0  # protocol-accounted transitions

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; valid: {SETTINGS}")
        spec = self.spec
        if self.setting == "unmodeled":
            setup = envs.make_unmodeled(spec)
            self.param_space = ParamSpace(setup.reduced_space)
            self.modeled_indices = setup.modeled_indices
            self.frozen_xi = setup.frozen_xi
        else:
            self.param_space = ParamSpace(spec.search_space)
            self.modeled_indices = tuple(range(spec.n_xi))
            self.frozen_xi = None
        self.target_noise = spec.noise_variance if self.setting == "noisy" else 0.0

    @property
    def n_params(self) -> int:
        """Dimensionality of the inference search space."""
        return self.param_space.dims

    @property
    def target_xi(self) -> np.ndarray:
        return self.spec.ground_truth_xi.values

    def embed(self, z: np.ndarray) -> np.ndarray:
        """Normalized (possibly reduced) draws -> full physical parameter vectors."""
        z = np.asarray(z, dtype=float)
        phys = denormalize(z, self.param_space)
        if self.frozen_xi is None:
            return phys
        full = np.broadcast_to(self.frozen_xi, z.shape[:-1] + (self.spec.n_xi,)).copy()
        full[..., list(self.modeled_indices)] = phys
        return full

    def collect_target_trajectory(
        self,
        policy,
        rng: np.random.Generator,
        max_steps: int,
        strategy: str,
        iteration_index: int,
        seed: int,
        policy_iteration: int | None = None,
    ) -> Trajectory:
        """One measured episode on the target; counted against the budget."""
        traj = envs.rollout(
            self.spec, policy, self.target_xi, max_steps, rng, self.target_noise
        )
        traj.collection_strategy = strategy
        traj.iteration_index = iteration_index
        traj.seed = seed
        traj.policy_iteration = policy_iteration
        self.target_transitions += len(traj)
        self.budget_used += len(traj)
        return traj

    def evaluate_on_target(
        self, policy: Policy, episodes: int, rng: np.random.Generator
    ) -> float:
        """Mean target return; physical steps tracked but not budgeted."""
        ret = evaluate_policy(
            policy,
            self.spec,
            self.target_xi,
            episodes,
            rng,
            noise_variance=self.target_noise,
        )
        self.eval_transitions += episodes * self.spec.episode_len
        return ret

    def charge_budget(self, transitions: int) -> None:
        self.budget_used += transitions
