"""Offline maximum-likelihood inference over distribution means and variances.

For every recorded transition the simulator is reset to the measured state,
stepped once under each of K parameter draws, and the resulting next-state
cloud is fit with a diagonal Gaussian; the recorded next state is scored
under that Gaussian with an additive variance regularizer epsilon. CMA-ES
searches the stacked (mean, log-variance) vector; epsilon is picked by
held-out transition likelihood over a small grid. Full-state resets are what
keeps simulated and measured trajectories aligned step by step.
"""

from __future__ import annotations

import logging

import numpy as np

from adrbench.adr.outcome import AdrOutcome, IterationResult
from adrbench.adr.replay import one_step_next_states
from adrbench.adr.scenario import Scenario
from adrbench.dist import DomainDistribution, NORMALIZED_HI, NORMALIZED_LO, gaussian
from adrbench.optim.cmaes import cmaes_minimize
from adrbench.policy import TrainerConfig, train_policy
from adrbench.trajectory import Dataset

log = logging.getLogger(__name__)

SAMPLE_FACTOR = 10  # draws per transition = SAMPLE_FACTOR * n_params
DEFAULT_EPSILON_GRID = (1e-5, 1e-3, 1e-1)
LOGVAR_BOUNDS = (np.log(1e-8), np.log(4.0))
HELDOUT_FRACTION = 0.2
MIN_SPLIT_TRANSITIONS = 10
DIVERGED_TRANSITION_LL = -1e9


def _stack_transitions(dataset: Dataset, n_latent: int, n_a: int):
    states, actions, next_states = [], [], []
    for traj in dataset.trajectories:
        states.append(traj.states[:-1])
        actions.append(traj.actions)
        next_states.append(traj.states[1:])
    if not states:
        raise ValueError("dataset is empty")
    return (
        np.concatenate(states).reshape(-1, n_latent),
        np.concatenate(actions).reshape(-1, n_a),
        np.concatenate(next_states).reshape(-1, n_latent),
    )


def _loglike_arrays(
    scenario: Scenario,
    states: np.ndarray,
    actions: np.ndarray,
    next_states: np.ndarray,
    phi: DomainDistribution,
    epsilon: float,
    base_normals: np.ndarray,
) -> float:
    """Log-likelihood of measured next states under the one-step sim ensemble."""
    K = base_normals.shape[1]
    z = phi.mean + np.sqrt(phi.diag_cov) * base_normals  # (T, K, n)
    z = np.clip(z, NORMALIZED_LO, NORMALIZED_HI)
    xis = scenario.embed(z)
    sim_next = one_step_next_states(scenario.spec, states, actions, xis)  # (T, K, nl)

    finite = np.all(np.isfinite(sim_next), axis=-1)  # (T, K)
    counts = finite.sum(axis=1)
    usable = counts >= 2
    total = float(np.sum(~usable) * DIVERGED_TRANSITION_LL)
    if not np.any(usable):
        return total
    sim = np.where(finite[..., None], sim_next, 0.0)
    cnt = counts[usable][:, None]
    mu = sim[usable].sum(axis=1) / cnt
    centered = np.where(finite[usable][..., None], sim[usable] - mu[:, None, :], 0.0)
    var = (centered**2).sum(axis=1) / (cnt - 1.0)
    var_reg = var + epsilon
    resid = next_states[usable] - mu
    ll = -0.5 * np.sum(np.log(2.0 * np.pi * var_reg) + resid**2 / var_reg, axis=1)
    return total + float(np.sum(ll))


def dropo_loglike(
    dataset: Dataset,
    phi: DomainDistribution,
    scenario: Scenario,
    epsilon: float,
    K: int,
    rng: np.random.Generator | None = None,
    base_normals: np.ndarray | None = None,
) -> float:
    """Dataset log-likelihood under source distribution ``phi``.

    ``K`` parameter draws per transition are taken either from ``rng`` or
    from frozen ``base_normals`` of shape (T, K, n); freezing them makes the
    objective deterministic, which the parameter search relies on.
    """
    if K < 2:
        raise ValueError("K must be >= 2 (sample variance undefined otherwise)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    spec = scenario.spec
    states, actions, next_states = _stack_transitions(dataset, spec.n_latent, spec.n_a)
    if base_normals is None:
        if rng is None:
            raise ValueError("provide rng or base_normals")
        base_normals = rng.standard_normal((states.shape[0], K, scenario.n_params))
    if base_normals.shape != (states.shape[0], K, scenario.n_params):
        raise ValueError(f"base_normals must have shape (T, {K}, {scenario.n_params})")
    return _loglike_arrays(scenario, states, actions, next_states, phi, epsilon, base_normals)


def _phi_from_vector(x: np.ndarray) -> DomainDistribution:
    n = x.shape[0] // 2
    return gaussian(x[:n], np.exp(x[n:]))


def run_dropo(
    scenario: Scenario,
    dataset: Dataset,
    epsilon_grid=DEFAULT_EPSILON_GRID,
    cma_budget: int = 2000,
    trainer_config: TrainerConfig | None = None,
    rng: np.random.Generator | None = None,
    eval_episodes: int = 10,
    sigma0: float = 1.0,
) -> AdrOutcome:
    epsilon_grid = tuple(epsilon_grid)
    if not epsilon_grid:
        raise ValueError("epsilon_grid must be non-empty")
    spec = scenario.spec
    n = scenario.n_params
    K = SAMPLE_FACTOR * n
    states, actions, next_states = _stack_transitions(dataset, spec.n_latent, spec.n_a)
    total = states.shape[0]

    if total < MIN_SPLIT_TRANSITIONS:
        log.warning(
            "dropo %s: only %d transitions, no held-out split; using epsilon=%g",
            spec.name,
            total,
            epsilon_grid[0],
        )
        n_train = total
    else:
        n_train = total - max(1, int(HELDOUT_FRACTION * total))
    train_slice = slice(0, n_train)
    held_slice = slice(n_train, total)

    base_normals = rng.standard_normal((total, K, n))  # frozen noise, shared by all evals
    bounds = np.concatenate(
        [
            np.tile([[NORMALIZED_LO, NORMALIZED_HI]], (n, 1)),
            np.tile([list(LOGVAR_BOUNDS)], (n, 1)),
        ]
    )
    x0 = np.concatenate([np.full(n, 2.0), np.zeros(n)])  # the conservative prior

    per_epsilon = []
    for eps in epsilon_grid:
        trace: list[dict] = []

        def objective(x_batch: np.ndarray) -> np.ndarray:
            out = np.empty(x_batch.shape[0])
            for i, x in enumerate(x_batch):
                out[i] = -_loglike_arrays(
                    scenario,
                    states[train_slice],
                    actions[train_slice],
                    next_states[train_slice],
                    _phi_from_vector(x),
                    eps,
                    base_normals[train_slice],
                )
            return out

        result = cmaes_minimize(
            objective,
            x0=x0,
            sigma0=sigma0,
            rng=rng.spawn(1)[0],
            max_evals=cma_budget,
            bounds=bounds,
            vectorized=True,
            trace=trace,
        )
        phi = _phi_from_vector(result.best_x)
        if n_train < total:
            held_ll = _loglike_arrays(
                scenario,
                states[held_slice],
                actions[held_slice],
                next_states[held_slice],
                phi,
                eps,
                base_normals[held_slice],
            )
        else:
            held_ll = -np.inf  # no held-out data; grid order decides
        per_epsilon.append(
            {"epsilon": eps, "phi": phi, "heldout_ll": held_ll, "train_nll": result.best_f,
             "trace": trace}
        )

    if n_train < total:
        winner = max(per_epsilon, key=lambda d: d["heldout_ll"])
    else:
        winner = per_epsilon[0]
    dist = winner["phi"]

    child = rng.spawn(1)[0]
    trained = train_policy(
        dist,
        spec,
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
        method="dropo",
        iterations=[record],
        extras={"per_epsilon": per_epsilon, "chosen_epsilon": winner["epsilon"], "K": K},
    )
