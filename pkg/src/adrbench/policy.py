"""Deterministic tanh policies and robust training over randomized dynamics.

Training maximizes the expected discounted return under the source
distribution: every candidate's fitness is averaged over episodes whose
dynamics parameters are freshly drawn from the distribution, so widening the
distribution directly widens the set of dynamics a single policy must cover.
The search over policy weights is a cross-entropy method with a diagonal
Gaussian; candidate evaluations within a generation share the same dynamics
draws and initial states (paired comparisons), and every rollout is
vectorized across the whole population.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adrbench import dist as dist_mod
from adrbench.dist import DomainDistribution, ParamSpace, denormalize
from adrbench.envs import core as envs

# Fixed per-environment observation scaling applied inside the policy input
# layer; keeps tanh units in a sane range without touching the environments.
OBS_SCALES = {
    "pendulum": np.array([1.0, 1.0, 0.125]),
    "cartpole": np.array([0.4, 0.2, 1.0, 1.0, 0.1]),
    "acrobot": np.array([1.0, 1.0, 1.0, 1.0, 0.1, 0.05]),
}


@dataclass(frozen=True)
class Architecture:
    kind: str  # "linear" | "mlp"
    n_s: int
    n_a: int
    hidden: tuple[int, ...] = (32, 32)

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown architecture {self.kind!r}")

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        if self.kind == "linear":
            return [(self.n_a, self.n_s)]
        sizes = [self.n_s, *self.hidden, self.n_a]
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    @property
    def weight_count(self) -> int:
        return sum(out * inp + out for out, inp in self.layer_sizes)


def _unpack(arch: Architecture, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split flat weights (..., dims) into per-layer (W, b) with leading batch dims."""
    layers = []
    offset = 0
    lead = flat.shape[:-1]
    for out, inp in arch.layer_sizes:
        w = flat[..., offset : offset + out * inp].reshape(*lead, out, inp)
        offset += out * inp
        b = flat[..., offset : offset + out]
        offset += out
        layers.append((w, b))
    return layers


def forward(arch: Architecture, flat: np.ndarray, obs: np.ndarray, obs_scale: np.ndarray):
    """Pre-squash network output for batched weights (..., dims) and obs (..., n_s)."""
    h = obs * obs_scale
    layers = _unpack(arch, flat)
    for i, (w, b) in enumerate(layers):
        h = np.einsum("...oi,...i->...o", w, h) + b
        if i < len(layers) - 1:
            h = np.tanh(h)
    return h


@dataclass(frozen=True)
class Policy:
    """Immutable deterministic policy; actions tanh-squashed into the bounds."""

    arch: Architecture
    weights: np.ndarray
    action_bounds: np.ndarray  # (n_a, 2)
    obs_scale: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.arch.weight_count,):
            raise ValueError(
                f"architecture expects {self.arch.weight_count} weights, got {w.shape}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "action_bounds", np.asarray(self.action_bounds, float))
        object.__setattr__(self, "obs_scale", np.asarray(self.obs_scale, float))

    def act(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        raw = forward(self.arch, self.weights, obs, self.obs_scale)
        center = 0.5 * (self.action_bounds[:, 0] + self.action_bounds[:, 1])
        half = 0.5 * (self.action_bounds[:, 1] - self.action_bounds[:, 0])
        return center + half * np.tanh(raw)

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            kind=self.arch.kind,
            n_s=self.arch.n_s,
            n_a=self.arch.n_a,
            hidden=np.array(self.arch.hidden, dtype=int),
            weights=self.weights,
            action_bounds=self.action_bounds,
            obs_scale=self.obs_scale,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Policy":
        data = np.load(path)
        arch = Architecture(
            kind=str(data["kind"]),
            n_s=int(data["n_s"]),
            n_a=int(data["n_a"]),
            hidden=tuple(int(h) for h in data["hidden"]),
        )
        return cls(
            arch=arch,
            weights=data["weights"],
            action_bounds=data["action_bounds"],
            obs_scale=data["obs_scale"],
        )


def make_policy(spec: envs.EnvironmentSpec, weights: np.ndarray, kind: str = "mlp",
                hidden: tuple[int, ...] = (32, 32)) -> Policy:
    arch = Architecture(kind=kind, n_s=spec.n_s, n_a=spec.n_a, hidden=hidden)
    return Policy(arch, weights, spec.action_bounds, OBS_SCALES[spec.name])


@dataclass(frozen=True)
class TrainerConfig:
    gamma: float = 0.99
    population: int = 64
    elites: int = 8
    episodes_per_candidate: int = 4
    max_generations: int = 300
    reward_threshold: float = 0.0
    seed: int | None = None
    episode_len: int = 200
    init_std: float = 1.0
    extra_std: float = 0.05  # decaying exploration noise added to the elite std
    architecture: str = "mlp"
    hidden: tuple[int, ...] = (32, 32)
    restarts: int = 1  # extra search attempts when the threshold is missed
    validation_episodes: int = 8  # fresh episodes to pick the returned policy

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must be in (0, 1]")
        if not (0 < self.elites <= self.population):
            raise ValueError("need 0 < elites <= population")
        if self.restarts < 0 or self.validation_episodes < 1:
            raise ValueError("restarts >= 0 and validation_episodes >= 1 required")
        object.__setattr__(self, "hidden", tuple(self.hidden))


def _batched_episode(
    spec: envs.EnvironmentSpec,
    arch: Architecture,
    weights: np.ndarray,  # (B, dims)
    latents0: np.ndarray,  # (B, n_latent)
    xis: np.ndarray,  # (B, n_xi)
    steps: int,
    gamma: float,
    obs_scale: np.ndarray,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized closed-loop episodes; returns (discounted, undiscounted, ok)."""
    batch = weights.shape[0]
    center = 0.5 * (spec.action_bounds[:, 0] + spec.action_bounds[:, 1])
    half = 0.5 * (spec.action_bounds[:, 1] - spec.action_bounds[:, 0])
    latents = latents0.copy()
    disc = np.zeros(batch)
    undisc = np.zeros(batch)
    active = np.ones(batch, dtype=bool)
    ok = np.ones(batch, dtype=bool)
    gamma_t = 1.0
    for _ in range(steps):
        obs = envs.dynamics(spec.name).observe(latents)
        if noise_std > 0.0:
            obs = obs + noise_std * rng.standard_normal(obs.shape)
        raw = forward(arch, weights, obs, obs_scale)
        actions = center + half * np.tanh(raw)
        nxt, rewards, failed = envs.step_batch(spec, latents, actions, xis)
        rewards = np.where(np.isfinite(rewards), rewards, 0.0)
        disc += gamma_t * rewards * active
        undisc += rewards * active
        bad = ~np.all(np.isfinite(nxt), axis=-1)
        ok &= ~(bad & active)
        active &= ~failed
        latents = np.where(active[:, None], nxt, latents)
        gamma_t *= gamma
        if not np.any(active):
            break
    return disc, undisc, ok


@dataclass
class TrainResult:
    policy: Policy
    train_return: float
    generations: int
    episodes: int
    reached_threshold: bool
    best_fitness_history: list[float] = field(default_factory=list)

    def __iter__(self):  # allow `policy, ret = train_policy(...)`
        yield self.policy
        yield self.train_return


def _cem_attempt(source, spec, config, rng, embed, arch, obs_scale):
    """One CEM run; returns candidate weights for validation plus bookkeeping."""
    dims = arch.weight_count
    pop, k = config.population, config.episodes_per_candidate
    mean = np.zeros(dims)
    std = np.full(dims, config.init_std)
    best_fit = -np.inf
    best_weights = mean.copy()
    history: list[float] = []
    episodes = 0
    reached = False
    generations = 0
    elite_weights = np.zeros((config.elites, dims))

    for gen in range(config.max_generations):
        half = rng.standard_normal((pop // 2, dims))
        noise = np.concatenate([half, -half], axis=0)  # mirrored pairs
        if noise.shape[0] < pop:
            noise = np.concatenate([noise, rng.standard_normal((1, dims))], axis=0)
        weights = mean + std * noise
        z = dist_mod.sample(source, rng, clamp=True, size=k)
        xis = embed(z)  # (k, n_xi)
        latents0 = np.stack([envs.reset(spec, rng).q for _ in range(k)])

        w_rows = np.repeat(weights, k, axis=0)
        xi_rows = np.tile(xis, (pop, 1))
        l_rows = np.tile(latents0, (pop, 1))
        disc, undisc, ok = _batched_episode(
            spec, arch, w_rows, l_rows, xi_rows, config.episode_len, config.gamma, obs_scale
        )
        episodes += pop * k
        disc = disc.reshape(pop, k)
        undisc = undisc.reshape(pop, k)
        ok = ok.reshape(pop, k)
        fitness = np.where(np.all(ok, axis=1), disc.mean(axis=1), -np.inf)
        undisc_mean = undisc.mean(axis=1)

        if not np.any(np.isfinite(fitness)):
            raise RuntimeError(
                f"train_policy({spec.name}): every candidate diverged at generation {gen}"
            )
        order = np.argsort(-fitness, kind="stable")
        elite_idx = order[: config.elites]
        elite_weights = weights[elite_idx]
        if fitness[order[0]] > best_fit:
            best_fit = float(fitness[order[0]])
            best_weights = weights[order[0]].copy()
        history.append(best_fit)
        generations = gen + 1

        elite_undisc = float(undisc_mean[elite_idx].mean())
        if elite_undisc >= config.reward_threshold:
            reached = True
            break

        mean = elite_weights.mean(axis=0)
        decay = 1.0 - gen / config.max_generations
        std = np.sqrt(elite_weights.var(axis=0) + (config.extra_std * decay) ** 2)

    candidates = np.vstack([elite_weights, best_weights[None, :]])
    return candidates, reached, generations, episodes, history


def _validate_candidates(source, spec, config, rng, embed, arch, obs_scale, candidates):
    """Mean undiscounted return of each candidate on fresh shared episodes."""
    n_cand = candidates.shape[0]
    n_ep = config.validation_episodes
    z = dist_mod.sample(source, rng, clamp=True, size=n_ep)
    xis = embed(z)
    latents0 = np.stack([envs.reset(spec, rng).q for _ in range(n_ep)])
    w_rows = np.repeat(candidates, n_ep, axis=0)
    xi_rows = np.tile(xis, (n_cand, 1))
    l_rows = np.tile(latents0, (n_cand, 1))
    _, undisc, ok = _batched_episode(
        spec, arch, w_rows, l_rows, xi_rows, config.episode_len, 1.0, obs_scale
    )
    undisc = undisc.reshape(n_cand, n_ep)
    ok = ok.reshape(n_cand, n_ep)
    return np.where(np.all(ok, axis=1), undisc.mean(axis=1), -np.inf)


def train_policy(
    source: DomainDistribution,
    spec: envs.EnvironmentSpec,
    config: TrainerConfig,
    rng: np.random.Generator | None = None,
    param_space: ParamSpace | None = None,
    embed=None,
) -> TrainResult:
    """Cross-entropy search over policy weights under randomized dynamics.

    Per generation: ``population`` weight vectors are drawn, each scored by
    the mean discounted return over ``episodes_per_candidate`` episodes with
    fresh dynamics draws; the sampling Gaussian is refit on the ``elites``.
    A run stops once the elite mean undiscounted return reaches the reward
    threshold (an undiscounted quantity) or at ``max_generations``; if the
    threshold was missed, up to ``restarts`` fresh runs follow (the search
    is multimodal and occasionally stalls). The returned policy is the best
    of the final elites and the best-ever candidate, re-measured on fresh
    validation episodes so a noisy fitness estimate cannot pick the winner.
    ``embed`` maps normalized draws from ``source`` to full physical
    parameter vectors; by default the spec's full search space is used.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if param_space is None:
        param_space = ParamSpace(spec.search_space)
    if embed is None:
        embed = lambda z: denormalize(z, param_space)  # noqa: E731

    arch = Architecture(config.architecture, spec.n_s, spec.n_a, config.hidden)
    obs_scale = OBS_SCALES[spec.name]

    best_return = -np.inf
    best_weights = None
    best_history: list[float] = []
    total_episodes = 0
    total_generations = 0
    any_reached = False

    for _ in range(config.restarts + 1):
        candidates, reached, generations, episodes, history = _cem_attempt(
            source, spec, config, rng, embed, arch, obs_scale
        )
        total_episodes += episodes
        total_generations += generations
        values = _validate_candidates(
            source, spec, config, rng, embed, arch, obs_scale, candidates
        )
        idx = int(np.argmax(values))
        if values[idx] > best_return:
            best_return = float(values[idx])
            best_weights = candidates[idx].copy()
            best_history = history
        if reached:
            any_reached = True
            break

    policy = Policy(arch, best_weights, spec.action_bounds, obs_scale)
    return TrainResult(
        policy=policy,
        train_return=best_return,
        generations=total_generations,
        episodes=total_episodes,
        reached_threshold=any_reached,
        best_fitness_history=best_history,
    )


def evaluate_policy(
    policy: Policy,
    spec: envs.EnvironmentSpec,
    xi: np.ndarray,
    episodes: int,
    rng: np.random.Generator,
    noise_variance: float = 0.0,
    episode_len: int | None = None,
) -> float:
    """Mean undiscounted return over independent episodes at fixed dynamics."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    steps = episode_len if episode_len is not None else spec.episode_len
    latents0 = np.stack([envs.reset(spec, rng).q for _ in range(episodes)])
    weights = np.tile(policy.weights, (episodes, 1))
    xis = np.tile(np.asarray(xi, float), (episodes, 1))
    _, undisc, _ = _batched_episode(
        spec,
        policy.arch,
        weights,
        latents0,
        xis,
        steps,
        gamma=1.0,
        obs_scale=policy.obs_scale,
        noise_std=float(np.sqrt(noise_variance)),
        rng=rng,
    )
    return float(undisc.mean())


def evaluate_on_distribution(
    policy: Policy,
    spec: envs.EnvironmentSpec,
    source: DomainDistribution,
    episodes: int,
    rng: np.random.Generator,
    param_space: ParamSpace | None = None,
    embed=None,
    episode_len: int | None = None,
) -> float:
    """Mean undiscounted return with a fresh dynamics draw per episode."""
    if param_space is None:
        param_space = ParamSpace(spec.search_space)
    if embed is None:
        embed = lambda z: denormalize(z, param_space)  # noqa: E731
    steps = episode_len if episode_len is not None else spec.episode_len
    z = dist_mod.sample(source, rng, clamp=True, size=episodes)
    xis = embed(z)
    latents0 = np.stack([envs.reset(spec, rng).q for _ in range(episodes)])
    weights = np.tile(policy.weights, (episodes, 1))
    _, undisc, _ = _batched_episode(
        spec, policy.arch, weights, latents0, xis, steps, gamma=1.0, obs_scale=policy.obs_scale
    )
    return float(undisc.mean())
