"""Configuration loading and environment construction.

The shipped ``default_config.yaml`` pins every constant a run depends on
(ground truths, search spaces, noise levels, calibrated reward thresholds,
trainer and method hyperparameters). A user file overrides any subset; the
fully resolved dictionary is what gets snapshotted into a run manifest, so
nothing outside the snapshot influences results. See the CLI module for the
schema documentation.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from adrbench.envs import DynamicsVector, EnvironmentSpec, dynamics
from adrbench.policy import TrainerConfig


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    text = resources.files("adrbench").joinpath("default_config.yaml").read_text()
    return yaml.safe_load(text)


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Defaults deep-merged with the user file (if any); fully resolved."""
    cfg = default_config()
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = deep_merge(cfg, user)
    return cfg


def build_spec(name: str, config: dict) -> EnvironmentSpec:
    """Environment spec from the resolved configuration dictionary."""
    try:
        env_cfg = config["environments"][name]
    except KeyError:
        known = sorted(config.get("environments", {}))
        raise ConfigError(f"unknown environment {name!r}; configured: {known}") from None
    dyn = dynamics(name)

    gt_map = env_cfg["ground_truth"]
    missing = [p for p in dyn.XI_NAMES if p not in gt_map]
    if missing:
        raise ConfigError(f"{name}: ground_truth missing parameters {missing}")
    gt = np.array([float(gt_map[p]) for p in dyn.XI_NAMES])
    lo_f, hi_f = env_cfg["search_factor"]
    search_space = np.stack([lo_f * gt, hi_f * gt], axis=1)

    unmodeled_names = env_cfg.get("unmodeled", []) or []
    unknown = [p for p in unmodeled_names if p not in dyn.XI_NAMES]
    if unknown:
        raise ConfigError(f"{name}: unmodeled lists unknown parameters {unknown}")
    unmodeled = tuple(dyn.XI_NAMES.index(p) for p in unmodeled_names)

    worst = env_cfg.get("worst_ref")
    return EnvironmentSpec(
        name=name,
        n_s=dyn.OBS_DIM,
        n_a=dyn.ACT_DIM,
        n_latent=dyn.LATENT_DIM,
        n_xi=len(dyn.XI_NAMES),
        dt=float(env_cfg["dt"]),
        substeps=int(env_cfg["substeps"]),
        horizon=int(env_cfg["horizon"]),
        episode_len=int(env_cfg["episode_len"]),
        action_bounds=np.asarray(env_cfg["action_bounds"], dtype=float),
        xi_names=dyn.XI_NAMES,
        ground_truth_xi=DynamicsVector(gt, dyn.XI_NAMES),
        search_space=search_space,
        unmodeled_indices=unmodeled,
        noise_variance=float(env_cfg["noise_variance"]),
        reward_threshold=float(env_cfg["reward_threshold"]),
        worst_ref=None if worst is None else float(worst),
    )


def build_trainer_config(config: dict, env_name: str, reward_threshold: float) -> TrainerConfig:
    """Trainer settings with optional per-environment overrides applied."""
    base = dict(config["trainer"])
    overrides = config["environments"].get(env_name, {}).get("trainer", {})
    base.update(overrides)
    base["hidden"] = tuple(base.get("hidden", (32, 32)))
    base["reward_threshold"] = reward_threshold
    return TrainerConfig(**base)
