import numpy as np
import pytest

from adrbench.dist import ParamSpace, gaussian, normalize, uniform
from adrbench.policy import (
    Architecture,
    Policy,
    TrainerConfig,
    evaluate_on_distribution,
    evaluate_policy,
    make_policy,
    train_policy,
)


def point_mass(spec):
    space = ParamSpace(spec.search_space)
    z = normalize(spec.ground_truth_xi.values, space)
    return uniform(z, z)


class TestArchitecture:
    def test_weight_counts(self):
        linear = Architecture("linear", n_s=3, n_a=1)
        assert linear.weight_count == 3 * 1 + 1
        mlp = Architecture("mlp", n_s=3, n_a=1, hidden=(32, 32))
        assert mlp.weight_count == (32 * 3 + 32) + (32 * 32 + 32) + (1 * 32 + 1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Architecture("rnn", 3, 1)


class TestPolicyAct:
    def test_zero_weights_center_action(self, pendulum_spec):
        arch = Architecture("linear", pendulum_spec.n_s, pendulum_spec.n_a)
        pol = make_policy(pendulum_spec, np.zeros(arch.weight_count), kind="linear")
        np.testing.assert_allclose(pol.act(np.array([1.0, 0.0, 0.5])), [0.0])

    def test_bounded_for_any_weights(self, cartpole_spec, rng):
        pol = make_policy(
            cartpole_spec,
            rng.normal(scale=50.0, size=Architecture("mlp", 5, 1).weight_count),
        )
        for _ in range(100):
            a = pol.act(rng.normal(scale=5.0, size=5))
            assert np.all(np.abs(a) <= cartpole_spec.action_bounds[:, 1] + 1e-12)

    def test_deterministic(self, acrobot_spec, rng):
        pol = make_policy(
            acrobot_spec, rng.normal(size=Architecture("mlp", 6, 2).weight_count)
        )
        obs = rng.normal(size=6)
        np.testing.assert_array_equal(pol.act(obs), pol.act(obs))

    def test_weight_count_checked(self, pendulum_spec):
        with pytest.raises(ValueError):
            make_policy(pendulum_spec, np.zeros(10))

    def test_save_load_round_trip(self, pendulum_spec, rng, tmp_path):
        pol = make_policy(
            pendulum_spec, rng.normal(size=Architecture("mlp", 3, 1).weight_count)
        )
        pol.save(tmp_path / "p.npz")
        back = Policy.load(tmp_path / "p.npz")
        np.testing.assert_array_equal(back.weights, pol.weights)
        obs = rng.normal(size=3)
        np.testing.assert_array_equal(back.act(obs), pol.act(obs))


class TestTrainerConfig:
    def test_validations(self):
        with pytest.raises(ValueError):
            TrainerConfig(gamma=0.0)
        with pytest.raises(ValueError):
            TrainerConfig(elites=0)
        with pytest.raises(ValueError):
            TrainerConfig(elites=100, population=10)


class TestTrainPolicy:
    def test_episode_accounting(self, pendulum_spec, quick_trainer):
        cfg = quick_trainer(
            pendulum_spec,
            population=8,
            episodes_per_candidate=3,
            max_generations=4,
            reward_threshold=1e9,  # never reached: runs all generations
        )
        res = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                           rng=np.random.default_rng(0))
        assert res.episodes == 8 * 3 * 4
        assert res.generations == 4

    def test_restart_on_missed_threshold(self, pendulum_spec, quick_trainer):
        cfg = quick_trainer(
            pendulum_spec,
            population=8,
            episodes_per_candidate=2,
            max_generations=3,
            reward_threshold=1e9,
            restarts=2,
        )
        res = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                           rng=np.random.default_rng(1))
        assert res.generations == 3 * 3  # every attempt ran its budget
        assert res.episodes == 3 * (8 * 2 * 3)
        assert not res.reached_threshold

    def test_same_seed_identical_weights(self, pendulum_spec, quick_trainer):
        cfg = quick_trainer(pendulum_spec, max_generations=5)
        a = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                         rng=np.random.default_rng(9))
        b = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                         rng=np.random.default_rng(9))
        np.testing.assert_array_equal(a.policy.weights, b.policy.weights)

    def test_best_fitness_monotone(self, pendulum_spec, quick_trainer):
        cfg = quick_trainer(pendulum_spec, max_generations=10, reward_threshold=1e9)
        res = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                           rng=np.random.default_rng(3))
        hist = res.best_fitness_history
        assert all(b >= a for a, b in zip(hist, hist[1:]))

    def test_point_mass_kills_fitness_variance(self, pendulum_spec, quick_trainer):
        """With a point-mass source, a candidate's episode returns differ only
        through the reset draw; with a frozen reset they are identical."""
        from adrbench.policy import _batched_episode, Architecture, OBS_SCALES

        arch = Architecture("mlp", pendulum_spec.n_s, pendulum_spec.n_a)
        rng = np.random.default_rng(0)
        weights = np.tile(rng.normal(size=arch.weight_count), (4, 1))
        latents0 = np.tile(np.array([np.pi - 0.02, 0.01]), (4, 1))
        xi = pendulum_spec.ground_truth_xi.values
        disc, _, _ = _batched_episode(
            pendulum_spec, arch, weights, latents0, np.tile(xi, (4, 1)), 50, 0.99,
            OBS_SCALES["pendulum"],
        )
        assert np.ptp(disc) == 0.0

    @pytest.mark.slow
    def test_reaches_threshold_on_ground_truth(self, pendulum_spec, config):
        """The threshold-calibration property: training on the true dynamics
        reaches the shipped reward threshold within the generation budget."""
        from adrbench.config import build_trainer_config

        cfg = build_trainer_config(config, "pendulum", pendulum_spec.reward_threshold)
        res = train_policy(point_mass(pendulum_spec), pendulum_spec, cfg,
                           rng=np.random.default_rng(1))
        assert res.reached_threshold
        assert res.generations <= cfg.max_generations * (cfg.restarts + 1)

    @pytest.mark.slow
    def test_success_survives_reevaluation(self, pendulum_spec, config):
        """Stopping is not a lucky-seed artifact: an independent re-evaluation
        on the training distribution stays within 10% of the threshold."""
        from adrbench.config import build_trainer_config

        space = ParamSpace(pendulum_spec.search_space)
        z = normalize(pendulum_spec.ground_truth_xi.values, space)
        source = gaussian(z, np.full(3, 0.01))
        cfg = build_trainer_config(config, "pendulum", pendulum_spec.reward_threshold)
        res = train_policy(source, pendulum_spec, cfg, rng=np.random.default_rng(2))
        assert res.reached_threshold
        ret = evaluate_on_distribution(
            res.policy, pendulum_spec, source, 20, np.random.default_rng(77)
        )
        worst = pendulum_spec.worst_ref
        # >= 0.9x threshold on the worst-anchored scale
        assert (ret - worst) >= 0.9 * (pendulum_spec.reward_threshold - worst)


class TestEvaluatePolicy:
    def test_deterministic(self, pendulum_spec, rng):
        pol = make_policy(
            pendulum_spec, rng.normal(size=Architecture("mlp", 3, 1).weight_count)
        )
        xi = pendulum_spec.ground_truth_xi.values
        a = evaluate_policy(pol, pendulum_spec, xi, 1, np.random.default_rng(4))
        b = evaluate_policy(pol, pendulum_spec, xi, 1, np.random.default_rng(4))
        assert a == b

    def test_episode_count(self, pendulum_spec, rng, monkeypatch):
        import adrbench.policy as pol_mod

        calls = {"n": 0}
        orig = pol_mod.envs.reset

        def counting_reset(spec, r):
            calls["n"] += 1
            return orig(spec, r)

        monkeypatch.setattr(pol_mod.envs, "reset", counting_reset)
        pol = make_policy(
            pendulum_spec, rng.normal(size=Architecture("mlp", 3, 1).weight_count)
        )
        evaluate_policy(
            pol, pendulum_spec, pendulum_spec.ground_truth_xi.values, 10,
            np.random.default_rng(5),
        )
        assert calls["n"] == 10

    def test_requires_episodes(self, pendulum_spec, rng):
        pol = make_policy(
            pendulum_spec, rng.normal(size=Architecture("mlp", 3, 1).weight_count)
        )
        with pytest.raises(ValueError):
            evaluate_policy(pol, pendulum_spec, pendulum_spec.ground_truth_xi.values,
                            0, np.random.default_rng(0))
