"""Parameterized deterministic simulators: spec types, stepping, rollouts.

All dynamics are integrated with semi-implicit Euler over ``substeps`` inner
steps of ``dt / substeps``. Every operation is a pure function of
(spec, state, action, xi, rng); environments hold no mutable state, which
makes rollouts safe to evaluate concurrently and bit-reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import ModuleType

import numpy as np

from adrbench.envs import acrobot, cartpole, pendulum
from adrbench.envs.base import wrap_angle
from adrbench.trajectory import Trajectory

_DYNAMICS: dict[str, ModuleType] = {
    pendulum.NAME: pendulum,
    cartpole.NAME: cartpole,
    acrobot.NAME: acrobot,
}

ENV_NAMES = tuple(_DYNAMICS)

RESET_PERTURBATION = 0.05  # half-width of the uniform perturbation around rest


class DivergedDynamicsError(ValueError):
    """Raised when a step is asked to continue from non-finite state or parameters."""


def dynamics(name: str) -> ModuleType:
    try:
        return _DYNAMICS[name]
    except KeyError:
        raise KeyError(f"unknown environment {name!r}; known: {sorted(_DYNAMICS)}") from None


@dataclass(frozen=True)
class DynamicsVector:
    """Named vector of physical dynamics parameters."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.names),):
            raise ValueError(f"{len(self.names)} names but values shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("dynamics parameters must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class EnvState:
    """Latent simulator state (generalized coordinates then velocities) at time t."""

    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Static description of one benchmark environment."""

    name: str
    n_s: int
    n_a: int
    n_latent: int
    n_xi: int
    dt: float
    substeps: int
    horizon: int
    episode_len: int
    action_bounds: np.ndarray  # (n_a, 2)
    xi_names: tuple[str, ...]
    ground_truth_xi: DynamicsVector
    search_space: np.ndarray  # (n_xi, 2)
    unmodeled_indices: tuple[int, ...]
    noise_variance: float
    reward_threshold: float
    worst_ref: float | None = None  # normalization anchor for cost-style rewards

    def __post_init__(self):
        bounds = np.asarray(self.action_bounds, dtype=float).reshape(self.n_a, 2)
        space = np.asarray(self.search_space, dtype=float).reshape(self.n_xi, 2)
        object.__setattr__(self, "action_bounds", bounds)
        object.__setattr__(self, "search_space", space)
        if not (0 <= len(self.unmodeled_indices) < self.n_xi):
            raise ValueError("need 0 <= |unmodeled_indices| < n_xi")
        if len(set(self.unmodeled_indices)) != len(self.unmodeled_indices):
            raise ValueError("unmodeled_indices must be unique")
        if not np.all(space[:, 0] < space[:, 1]):
            raise ValueError("search space requires lo < hi per dimension")
        gt = self.ground_truth_xi.values
        if not np.all((space[:, 0] < gt) & (gt < space[:, 1])):
            raise ValueError("ground truth must lie strictly inside the search space")
        if self.horizon < 200:
            raise ValueError("horizon must be >= 200")
        if not (1 <= self.episode_len <= self.horizon):
            raise ValueError("episode_len must be in [1, horizon]")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


def clamp_action(spec: EnvironmentSpec, action: np.ndarray) -> np.ndarray:
    bounds = spec.action_bounds
    return np.clip(action, bounds[:, 0], bounds[:, 1])


def _integrate(dyn: ModuleType, q, action, xi, dt: float, substeps: int):
    """Semi-implicit Euler: velocities first, then positions; angles wrapped."""
    n_pos = dyn.LATENT_DIM // 2
    pos = q[..., :n_pos]
    vel = q[..., n_pos:]
    h = dt / substeps
    for _ in range(substeps):
        vel = vel + h * dyn.accel(pos, vel, action, xi)
        pos = pos + h * vel
    pos = pos.copy()
    angle = list(dyn.ANGLE_DIMS)
    pos[..., angle] = wrap_angle(pos[..., angle])
    return np.concatenate([pos, vel], axis=-1)


def step(
    spec: EnvironmentSpec, state: EnvState, action: np.ndarray, xi: np.ndarray
) -> tuple[EnvState, float, bool]:
    """Advance one control step; returns (next_state, reward, done).

    ``done`` is set at the horizon or when the failure predicate trips.
    Non-finite inputs are rejected so that callers can flag diverged replays.
    """
    dyn = dynamics(spec.name)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (spec.n_xi,):
        raise ValueError(f"xi must have shape ({spec.n_xi},), got {xi.shape}")
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(xi))):
        raise DivergedDynamicsError(
            f"{spec.name}: non-finite state or parameters at t={state.t}"
        )
    action = clamp_action(spec, np.asarray(action, dtype=float).reshape(spec.n_a))
    reward = float(dyn.reward(state.q, action))
    q_next = _integrate(dyn, state.q, action, xi, spec.dt, spec.substeps)
    t_next = state.t + 1
    done = t_next >= spec.horizon or bool(dyn.failed(q_next)) or not np.all(
        np.isfinite(q_next)
    )
    return EnvState(q=q_next, t=t_next), reward, done


def step_batch(
    spec: EnvironmentSpec, latents: np.ndarray, actions: np.ndarray, xis: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized step over a batch: (B, n_latent) x (B, n_a) x (B, n_xi).

    Returns (next_latents, rewards, failed). Non-finite outputs are left in
    place; callers decide how to penalize them.
    """
    dyn = dynamics(spec.name)
    actions = clamp_action(spec, actions)
    with np.errstate(over="ignore", invalid="ignore"):
        rewards = dyn.reward(latents, actions)
        nxt = _integrate(dyn, latents, actions, xis, spec.dt, spec.substeps)
        failed = dyn.failed(nxt) | ~np.all(np.isfinite(nxt), axis=-1)
    return nxt, rewards, failed


def reset(spec: EnvironmentSpec, rng: np.random.Generator) -> EnvState:
    """Initial state: small uniform perturbation around the rest configuration."""
    dyn = dynamics(spec.name)
    q = dyn.REST + rng.uniform(-RESET_PERTURBATION, RESET_PERTURBATION, size=spec.n_latent)
    return EnvState(q=q, t=0)


def set_state(spec: EnvironmentSpec, q: np.ndarray, t: int = 0) -> EnvState:
    """Place the simulator at an exact latent state (full-state reset)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (spec.n_latent,):
        raise ValueError(f"state must have shape ({spec.n_latent},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("state must be finite")
    return EnvState(q=q.copy(), t=t)


def get_state(state: EnvState) -> np.ndarray:
    return state.q.copy()


def observe(spec: EnvironmentSpec, q: np.ndarray) -> np.ndarray:
    return dynamics(spec.name).observe(q)


def rollout(
    spec: EnvironmentSpec,
    policy,
    xi: np.ndarray,
    max_steps: int,
    rng: np.random.Generator,
    noise_variance: float = 0.0,
) -> Trajectory:
    """Closed-loop episode from ``reset``; the policy acts on noisy observations.

    Measurement noise (i.i.d. zero-mean Gaussian, the given variance per
    dimension) is added to recorded observations and recorded states only;
    the latent simulator state stays clean. Ends at ``max_steps``, on the
    environment's done flag, or -- flagged ``diverged`` -- when the dynamics
    leave the finite range.
    """
    if max_steps > spec.horizon:
        raise ValueError(f"max_steps {max_steps} exceeds horizon {spec.horizon}")
    act = policy.act if hasattr(policy, "act") else policy
    noise_std = float(np.sqrt(noise_variance))

    def measure(q):
        o = observe(spec, q)
        if noise_std > 0.0:
            o = o + noise_std * rng.standard_normal(spec.n_s)
            s = q + noise_std * rng.standard_normal(spec.n_latent)
        else:
            s = q.copy()
        return s, o

    state = reset(spec, rng)
    true_states = [state.q.copy()]
    s0, o0 = measure(state.q)
    states, obs = [s0], [o0]
    actions: list[np.ndarray] = []
    rewards: list[float] = []
    diverged = False

    for _ in range(max_steps):
        action = np.asarray(act(obs[-1]), dtype=float).reshape(spec.n_a)
        try:
            state, reward, done = step(spec, state, action, xi)
        except DivergedDynamicsError:
            diverged = True
            break
        if not np.all(np.isfinite(state.q)):
            diverged = True
            break
        actions.append(clamp_action(spec, action))
        rewards.append(reward)
        true_states.append(state.q.copy())
        s, o = measure(state.q)
        states.append(s)
        obs.append(o)
        if done:
            break

    return Trajectory(
        actions=np.array(actions).reshape(len(actions), spec.n_a),
        rewards=np.array(rewards),
        states=np.array(states),
        obs=np.array(obs),
        true_states=np.array(true_states),
        diverged=diverged,
        noise_variance=noise_variance,
    )


@dataclass(frozen=True)
class UnmodeledSetup:
    """Source-side configuration for the unmodeled-phenomena setting."""

    target_xi: DynamicsVector
    reduced_space: np.ndarray  # (n_modeled, 2) physical bounds
    frozen_xi: np.ndarray  # full-length template; unmodeled dims fixed
    modeled_indices: tuple[int, ...]


UNMODELED_SCALE = 0.8  # unmodeled parameters run at 80% of their true value


def make_unmodeled(spec: EnvironmentSpec) -> UnmodeledSetup:
    """Freeze the unmodeled dimensions at 80% of ground truth and drop them
    from the inference search space. The target keeps the full ground truth."""
    if not spec.unmodeled_indices:
        raise ValueError(
            f"{spec.name} has no unmodeled dimensions; use the vanilla setting"
        )
    unmodeled = set(spec.unmodeled_indices)
    modeled = tuple(i for i in range(spec.n_xi) if i not in unmodeled)
    frozen = spec.ground_truth_xi.values.copy()
    for i in spec.unmodeled_indices:
        frozen[i] *= UNMODELED_SCALE
    return UnmodeledSetup(
        target_xi=spec.ground_truth_xi,
        reduced_space=spec.search_space[list(modeled)],
        frozen_xi=frozen,
        modeled_indices=modeled,
    )
