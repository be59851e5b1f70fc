import numpy as np
import pytest

from adrbench.config import build_spec, build_trainer_config, load_config


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def pendulum_spec(config):
    return build_spec("pendulum", config)


@pytest.fixture(scope="session")
def cartpole_spec(config):
    return build_spec("cartpole", config)


@pytest.fixture(scope="session")
def acrobot_spec(config):
    return build_spec("acrobot", config)


@pytest.fixture(scope="session")
def all_specs(pendulum_spec, cartpole_spec, acrobot_spec):
    return {s.name: s for s in (pendulum_spec, cartpole_spec, acrobot_spec)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quick_trainer(config):
    """Trimmed trainer for tests that need a usable (not optimal) policy."""

    def make(spec, **overrides):
        base = build_trainer_config(config, spec.name, spec.reward_threshold)
        kwargs = {
            "max_generations": 40,
            "population": 32,
            "elites": 6,
            "episodes_per_candidate": 2,
            "restarts": 0,
        }
        kwargs.update(overrides)
        from dataclasses import replace

        return replace(base, **kwargs)

    return make
