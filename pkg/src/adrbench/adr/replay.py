"""Batched simulator replays used by the inference objectives.

Three replay styles, matching how each method consumes target data:

* open-loop: execute the recorded action sequence regardless of where the
  simulated state drifts (DROID);
* closed-loop: re-run a policy from the recorded initial state (SimOpt);
* one-step: reset to every recorded state, apply its recorded action once
  (DROPO).

All replays are vectorized over candidate dynamics parameters. Divergence
(non-finite states, or states beyond an escape magnitude whose squared
errors would overflow) freezes the affected batch rows and reports how many
steps completed, so objective functions can convert missing steps into
finite penalties instead of letting NaNs escape.
"""

from __future__ import annotations

import numpy as np

from adrbench.envs import core as envs
from adrbench.policy import Policy, forward
from adrbench.trajectory import Trajectory

DIVERGENCE_LIMIT = 1e6  # |state| beyond this counts as an escaped replay


def _alive_rows(states: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.all(np.isfinite(states) & (np.abs(states) < DIVERGENCE_LIMIT), axis=-1)


def open_loop_obs(
    spec: envs.EnvironmentSpec, traj: Trajectory, xis: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Replay recorded actions from the recorded initial state under each xi.

    Returns (sim_obs, steps_done): sim_obs has shape (B, L, n_s) and is only
    meaningful up to each row's steps_done; rows freeze once non-finite.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    batch = xis.shape[0]
    length = len(traj)
    latents = np.tile(traj.states[0], (batch, 1))
    sim_obs = np.zeros((batch, length, spec.n_s))
    steps_done = np.zeros(batch, dtype=int)
    alive = np.ones(batch, dtype=bool)
    alive &= _alive_rows(latents)
    for t in range(length):
        actions = np.tile(traj.actions[t], (batch, 1))
        nxt, _, _ = envs.step_batch(spec, latents, actions, xis)
        alive &= _alive_rows(nxt)
        if not np.any(alive):
            break
        latents = np.where(alive[:, None], nxt, latents)
        obs = envs.observe(spec, latents)
        sim_obs[alive, t] = obs[alive]
        steps_done[alive] = t + 1
    return sim_obs, steps_done


def closed_loop_obs(
    spec: envs.EnvironmentSpec,
    policy: Policy,
    initial_latent: np.ndarray,
    xis: np.ndarray,
    max_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll the policy in simulation from one fixed initial state under each xi.

    Returns (sim_obs, steps_done) shaped like :func:`open_loop_obs`; rows stop
    early on the environment's failure predicate or on divergence. The
    recorded sequence starts at the observation of the state *after* the
    first action, aligning index t with the target trajectory's obs[t + 1].
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    batch = xis.shape[0]
    latents = np.tile(np.asarray(initial_latent, dtype=float), (batch, 1))
    weights = np.tile(policy.weights, (batch, 1))
    center = 0.5 * (spec.action_bounds[:, 0] + spec.action_bounds[:, 1])
    half = 0.5 * (spec.action_bounds[:, 1] - spec.action_bounds[:, 0])
    sim_obs = np.zeros((batch, max_steps, spec.n_s))
    steps_done = np.zeros(batch, dtype=int)
    alive = np.ones(batch, dtype=bool)
    for t in range(max_steps):
        obs = envs.observe(spec, latents)
        raw = forward(policy.arch, weights, obs, policy.obs_scale)
        actions = center + half * np.tanh(raw)
        nxt, _, failed = envs.step_batch(spec, latents, actions, xis)
        stepped = alive & _alive_rows(nxt)
        latents = np.where(stepped[:, None], nxt, latents)
        sim_obs[stepped, t] = envs.observe(spec, latents)[stepped]
        steps_done[stepped] = t + 1
        alive = stepped & ~failed
        if not np.any(alive):
            break
    return sim_obs, steps_done


def one_step_next_states(
    spec: envs.EnvironmentSpec,
    states: np.ndarray,  # (T, n_latent) recorded s_t
    actions: np.ndarray,  # (T, n_a) recorded a_t
    xis: np.ndarray,  # (T, K, n_xi) per-transition parameter draws
) -> np.ndarray:
    """Reset to each recorded state and apply its recorded action once per draw.

    Returns simulated next latents of shape (T, K, n_latent).
    """
    T, K = xis.shape[0], xis.shape[1]
    lat = np.repeat(states, K, axis=0)
    act = np.repeat(actions, K, axis=0)
    nxt, _, _ = envs.step_batch(spec, lat, act, xis.reshape(T * K, -1))
    return nxt.reshape(T, K, -1)
