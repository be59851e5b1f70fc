"""Release acceptance suite.

Thirteen gate properties, one test each, printed as a pass/fail checklist.
Desk-scale reproductions of the benchmark's qualitative findings (parameter
recovery, optimizer trust regions, variance collapse, budget parity,
determinism) rather than absolute return curves. The expensive fixtures are
shared across criteria; run with ``pytest tests/test_acceptance.py -v -s``
to watch the checklist lines as they complete.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from oracles import frictionless_xi, grid_dual_solve, rk4_trajectory

from adrbench.adr import (
    Scenario,
    collect_offline_dataset,
    run_droid,
    run_dropo,
    run_simopt,
)
from adrbench.config import build_spec, build_trainer_config, deep_merge, load_config
from adrbench.dist import gaussian, kl_gaussian, normalize, prior, sample
from adrbench.envs import dynamics, reset, rollout, step
from adrbench.harness import (
    BenchmarkConfig,
    export_results,
    normalized_return,
    run_cell,
)
from adrbench.optim.cmaes import cmaes_minimize
from adrbench.optim.gp import GpHyper, bo_suggest, expected_improvement, gp_fit, gp_posterior
from adrbench.optim.reps import RepsConfig, reps_update, solve_dual
from adrbench.policy import train_policy
from adrbench.trajectory import validate_dataset


def checklist(number: int, name: str, ok: bool, detail: str = ""):
    line = f"[{number:2d}/13] {'PASS' if ok else 'FAIL'} - {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared fixtures


TRIMMED = {
    "trainer": {
        "max_generations": 10,
        "population": 24,
        "elites": 6,
        "episodes_per_candidate": 2,
        "restarts": 0,
    },
    "methods": {
        "udr": {"n_configs": 4},
        "simopt": {"samples_per_update": 200, "updates_per_iteration": 3},
        "droid": {"cma_budget": 400},
        "dropo": {"cma_budget": 300, "epsilon_grid": [1e-3]},
    },
}


@pytest.fixture(scope="module")
def full_config():
    return load_config()


@pytest.fixture(scope="module")
def recovery_runs(full_config):
    """Vanilla pendulum inference at full budgets, three seeds.

    One noiseless 200-transition trajectory per seed (random-action
    excitation); DROID and DROPO each infer from it and train a final
    policy. Shared by the recovery and variance-collapse criteria.
    """
    spec = build_spec("pendulum", full_config)
    trainer = build_trainer_config(full_config, "pendulum", spec.reward_threshold)
    d_cfg = full_config["methods"]["droid"]
    p_cfg = full_config["methods"]["dropo"]
    runs = []
    for seed in (0, 1, 2):
        t0 = time.perf_counter()
        collect_scen = Scenario(spec, "vanilla")
        rng = np.random.default_rng(1000 + seed)
        dataset = collect_offline_dataset(
            collect_scen, "random", 1, rng, trajectory_len=200, seed=seed,
        )
        scen_droid = Scenario(spec, "vanilla")
        droid_out = run_droid(
            scen_droid, dataset, int(d_cfg["cma_budget"]), trainer,
            np.random.default_rng(2000 + seed), eval_episodes=10,
            sigma0=float(d_cfg["sigma0"]),
        )
        scen_dropo = Scenario(spec, "vanilla")
        dropo_out = run_dropo(
            scen_dropo, dataset, epsilon_grid=tuple(p_cfg["epsilon_grid"]),
            cma_budget=int(p_cfg["cma_budget"]), trainer_config=trainer,
            rng=np.random.default_rng(3000 + seed), eval_episodes=10,
            sigma0=float(p_cfg["sigma0"]),
        )
        z_gt = normalize(spec.ground_truth_xi.values, scen_droid.param_space)
        runs.append(
            {
                "seed": seed,
                "z_gt": z_gt,
                "droid": droid_out,
                "dropo": dropo_out,
                "spec": spec,
                "seconds": time.perf_counter() - t0,
            }
        )
    return runs


@pytest.fixture(scope="module")
def protocol_cell(full_config):
    """Full-protocol pendulum vanilla cell (5 iterations x 200 transitions)
    with trimmed optimizer/trainer budgets; exercises budgets and parity."""
    cfg_dict = deep_merge(full_config, TRIMMED)
    cfg_dict["run"] = dict(cfg_dict["run"])
    cfg_dict["run"].update(
        {
            "environments": ["pendulum"],
            "settings": ["vanilla"],
            "seeds": [0],
            "eval_episodes": 3,
        }
    )
    config = BenchmarkConfig.from_dict(cfg_dict)
    records, artifacts = run_cell("pendulum", "vanilla", 0, config)
    return config, records, artifacts


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_cmaes_oracles():
    t0 = time.perf_counter()
    res_sphere = cmaes_minimize(
        lambda x: float(np.sum(x * x)), np.full(8, 3.0), 1.0,
        np.random.default_rng(0), max_evals=20_000,
    )
    t_sphere = time.perf_counter() - t0
    t0 = time.perf_counter()
    res_rosen = cmaes_minimize(
        lambda x: float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2),
        np.zeros(2), 0.5, np.random.default_rng(1), max_evals=30_000,
    )
    t_rosen = time.perf_counter() - t0
    ok = (
        res_sphere.best_f < 1e-10
        and res_rosen.best_f < 1e-8
        and t_sphere < 10.0
        and t_rosen < 10.0
    )
    checklist(
        1, "CMA-ES optimizer oracles", ok,
        f"sphere8 f={res_sphere.best_f:.1e} in {t_sphere:.1f}s; "
        f"rosenbrock2 f={res_rosen.best_f:.1e} in {t_rosen:.1f}s",
    )


def test_criterion_02_reps_trust_region():
    rng = np.random.default_rng(7)
    worst_ratio = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        dist = gaussian(rng.uniform(0.5, 3.5, n), rng.uniform(0.2, 1.5, n))
        kl_bound = float(rng.choice([0.5, 1.0, 2.0]))
        config = RepsConfig(kl_bound=kl_bound, samples_per_update=1000)
        samples = sample(dist, rng, clamp=False, size=1000)
        target = rng.uniform(0, 4, n)
        costs = np.sum((samples - target) ** 2, axis=1) + 0.1 * rng.normal(size=1000)
        new, _ = reps_update(dist, samples, costs, config)
        worst_ratio = max(worst_ratio, kl_gaussian(new, dist) / kl_bound)

    grid_rng = np.random.default_rng(8)
    instances = [
        np.array([1.0, 2.0, 5.0]),
        np.array([0.0, 0.1, 0.2]),
        np.array([10.0, 0.0, 3.0]),
        np.array([-1.0, -2.0, -0.5]),
    ] + [grid_rng.normal(scale=s, size=3) for s in (0.1, 0.5, 1, 3, 10, 30, 100, 300)] + [
        grid_rng.uniform(-5, 5, size=3) for _ in range(8)
    ]
    max_eta_err = 0.0
    for costs in instances:
        for kl_bound in (0.3, 0.8):
            eta = solve_dual(costs, kl_bound)
            eta_grid = grid_dual_solve(costs, kl_bound)
            max_eta_err = max(max_eta_err, abs(eta - eta_grid) / eta_grid)
    ok = worst_ratio <= 1.05 and max_eta_err < 1e-6 and len(instances) >= 20
    checklist(
        2, "REPS trust region and dual oracle", ok,
        f"max KL/bound={worst_ratio:.3f} over 100 instances; "
        f"max dual mismatch={max_eta_err:.1e} over {len(instances)} x 2 instances",
    )


def test_criterion_03_gp_ei_correctness():
    rng = np.random.default_rng(9)
    X = rng.uniform(0, 4, size=(9, 2))
    y = np.sin(X[:, 0]) * np.cos(X[:, 1])
    hyper = GpHyper(np.ones(2), 1.0, 0.0)
    model = gp_fit(X, y, hyper)
    interp_err = 0.0
    for xi, yi in zip(X, y):
        m, _ = gp_posterior(model, xi)
        interp_err = max(interp_err, abs(m - yi))

    probes = rng.uniform(-1, 5, size=(1000, 2))
    ei = expected_improvement(model, probes, best_y=float(y.max()))
    ei_nonneg = bool(np.all(ei >= 0))

    X1 = np.array([[1.0], [3.0]])
    y1 = np.array([0.0, 1.0])
    m1 = gp_fit(X1, y1, GpHyper(np.ones(1), 1.0, 1e-6))
    grid = np.linspace(0, 4, 10_000)[:, None]
    x_grid = float(grid[int(np.argmax(expected_improvement(m1, grid, 1.0))), 0])
    x_bo = float(bo_suggest(m1, np.array([[0.0, 4.0]]), np.random.default_rng(0))[0])

    ok = interp_err < 1e-6 and ei_nonneg and abs(x_bo - x_grid) <= 4.0 / 10_000
    checklist(
        3, "GP interpolation and expected improvement", ok,
        f"interp_err={interp_err:.1e}; EI>=0 on 1e3 probes; "
        f"argmax grid gap={abs(x_bo - x_grid):.2e}",
    )


def test_criterion_04_physics_energy(full_config):
    details = []
    ok = True
    for name in ("pendulum", "cartpole", "acrobot"):
        spec = build_spec(name, full_config)
        dyn = dynamics(name)
        xi = frictionless_xi(spec)
        q0 = reset(spec, np.random.default_rng(0)).q
        e0 = float(dyn.energy(q0, xi))
        q_ref = rk4_trajectory(spec, q0, xi, total_time=1.0, dt=1e-5)
        oracle_drift = abs(float(dyn.energy(q_ref, xi)) - e0)

        state = reset(spec, np.random.default_rng(0))
        worst = 0.0
        energy = float(dyn.energy(state.q, xi))
        for _ in range(500):
            state, _, done = step(spec, state, np.zeros(spec.n_a), xi)
            e_next = float(dyn.energy(state.q, xi))
            worst = max(worst, abs(e_next - energy))
            energy = e_next
            if done:
                break
        ok = ok and worst <= 1e-4 and oracle_drift < 1e-8
        details.append(f"{name} drift={worst:.1e} oracle={oracle_drift:.1e}")
    checklist(4, "frictionless energy drift <= 1e-4/step", ok, "; ".join(details))


def test_criterion_05_vanilla_recovery(recovery_runs):
    details = []
    ok = True
    droid_hits, dropo_hits = 0, 0
    for run in recovery_runs:
        spec = run["spec"]
        z_gt = run["z_gt"]
        droid_err = float(np.max(np.abs(run["droid"].iterations[0].inferred.mean - z_gt)))
        dropo_err = float(np.max(np.abs(run["dropo"].iterations[0].inferred.mean - z_gt)))
        ok = ok and droid_err <= 0.4 and dropo_err <= 0.4
        droid_norm = normalized_return(
            run["droid"].iterations[0].raw_return, spec.reward_threshold, spec.worst_ref
        )
        dropo_norm = normalized_return(
            run["dropo"].iterations[0].raw_return, spec.reward_threshold, spec.worst_ref
        )
        droid_hits += droid_norm >= 0.9
        dropo_hits += dropo_norm >= 0.9
        ok = ok and run["seconds"] < 15 * 60
        details.append(
            f"seed{run['seed']}: err D={droid_err:.2f}/P={dropo_err:.2f} "
            f"norm D={droid_norm:.2f}/P={dropo_norm:.2f} {run['seconds']:.0f}s"
        )
    ok = ok and droid_hits >= 2 and dropo_hits >= 2
    checklist(
        5, "vanilla recovery within 0.4/dim, return >= 0.9 on 2/3 seeds", ok,
        "; ".join(details),
    )


def test_criterion_06_simopt_convergence(full_config):
    spec = build_spec("pendulum", full_config)
    trainer = build_trainer_config(full_config, "pendulum", spec.reward_threshold)
    so = full_config["methods"]["simopt"]
    reps_cfg = RepsConfig(
        kl_bound=float(so["kl_bound"]),
        samples_per_update=int(so["samples_per_update"]),
        updates_per_iteration=int(so["updates_per_iteration"]),
    )
    scen = Scenario(spec, "vanilla")
    rng = np.random.default_rng(4000)
    prior_res = train_policy(
        prior(scen.param_space), spec, trainer, rng=rng.spawn(1)[0],
        param_space=scen.param_space, embed=scen.embed,
    )
    out = run_simopt(
        scen, prior_res.policy, 5, reps_cfg, trainer, rng, eval_episodes=5,
        trajectory_len=200, seed=0,
    )
    trace = out.extras["trace"]
    first = next(r["mean_cost"] for r in trace if r["iteration"] == 1)
    last = [r["mean_cost"] for r in trace if r["iteration"] == 5][-1]
    ok = last <= 0.2 * first and scen.budget_used <= 1000
    checklist(
        6, "online discrepancy converges within budget", ok,
        f"iter1 mean={first:.1f} -> iter5 mean={last:.1f} "
        f"(ratio {last / first:.3f}); transitions={scen.budget_used}",
    )


def test_criterion_07_droid_variance_collapse(recovery_runs):
    traces = [
        float(np.sum(run["droid"].iterations[0].inferred.diag_cov))
        for run in recovery_runs
    ]
    hits = sum(t < 1e-3 for t in traces)
    ok = hits >= 2
    checklist(
        7, "DROID collapses to near-zero variance on >=2/3 cells", ok,
        "traces " + ", ".join(f"{t:.1e}" for t in traces),
    )


def test_criterion_08_unmodeled_exactness(full_config):
    cfg_dict = deep_merge(full_config, TRIMMED)
    details = []
    ok = True
    for name in ("pendulum", "cartpole", "acrobot"):
        spec = build_spec(name, cfg_dict)
        scen = Scenario(spec, "unmodeled")
        gt = spec.ground_truth_xi.values
        z = np.full(scen.n_params, 1.7)
        xi_full = scen.embed(z)
        frozen_exact = all(
            xi_full[i] == 0.8 * gt[i] for i in spec.unmodeled_indices
        )
        reduced = scen.n_params == spec.n_xi - len(spec.unmodeled_indices)
        ok = ok and frozen_exact and reduced
        details.append(f"{name}: frozen@0.8 exact, dims {spec.n_xi}->{scen.n_params}")
    # inferred distributions live in the reduced space
    spec = build_spec("pendulum", cfg_dict)
    trainer = build_trainer_config(cfg_dict, "pendulum", spec.reward_threshold)
    trainer = replace(trainer, max_generations=4, population=16)
    scen = Scenario(spec, "unmodeled")
    rng = np.random.default_rng(5000)
    dataset = collect_offline_dataset(
        scen, "random", 1, rng, trajectory_len=100
    )
    pure = Scenario(spec, "unmodeled")
    droid_out = run_droid(pure, dataset, 90, trainer, rng.spawn(1)[0], eval_episodes=2)
    dropo_out = run_dropo(
        pure, dataset, epsilon_grid=(1e-3,), cma_budget=90, trainer_config=trainer,
        rng=rng.spawn(1)[0], eval_episodes=2,
    )
    n_red = spec.n_xi - len(spec.unmodeled_indices)
    ok = ok and droid_out.iterations[0].inferred.dims == n_red
    ok = ok and dropo_out.iterations[0].inferred.dims == n_red
    checklist(
        8, "unmodeled dims frozen at exactly 0.8x and absent from inference", ok,
        "; ".join(details),
    )


def test_criterion_09_noise_calibration(full_config):
    details = []
    ok = True
    for name, expected_var in (("pendulum", 1e-4), ("cartpole", 1e-4), ("acrobot", 1e-3)):
        spec = build_spec(name, full_config)
        assert spec.noise_variance == expected_var
        rng = np.random.default_rng(6000)
        action_rng = np.random.default_rng(6001)
        residuals = []
        count = 0
        lo, hi = spec.action_bounds[:, 0], spec.action_bounds[:, 1]
        while count < 1_000_000:
            traj = rollout(
                spec,
                lambda o: action_rng.uniform(lo, hi),
                spec.ground_truth_xi.values,
                100,
                rng,
                noise_variance=spec.noise_variance,
            )
            obs_res = (traj.obs - dynamics(name).observe(traj.true_states)).ravel()
            state_res = (traj.states - traj.true_states).ravel()
            residuals.extend((obs_res, state_res))
            count += obs_res.size + state_res.size
        var = float(np.var(np.concatenate(residuals)))
        rel = abs(var - expected_var) / expected_var
        ok = ok and rel < 0.05
        details.append(f"{name} var={var:.3e} (target {expected_var:g}, off {rel:.1%})")
    checklist(9, "noise injection calibrated within 5% over 1e6 samples", ok, "; ".join(details))


def test_criterion_10_budgets_and_parity(protocol_cell, tmp_path):
    config, records, artifacts = protocol_cell
    within = all(r.transitions_used <= 1000 for r in records)
    all_ok = all(r.status == "ok" for r in records)

    # byte parity: the cumulative dataset the offline methods consumed at
    # iteration k serializes to an exact prefix of the full online log
    dataset = artifacts.datasets["simopt-policy"]
    full_path = tmp_path / "full.jsonl"
    dataset.save(full_path)
    full_bytes = full_path.read_bytes()
    parity = True
    for k in range(1, config.iterations + 1):
        sub_path = tmp_path / f"sub{k}.jsonl"
        dataset.subset(k).save(sub_path)
        parity = parity and full_bytes.startswith(sub_path.read_bytes())

    # offline purity: a fresh offline run on the logged data touches no target
    spec = build_spec("pendulum", config.raw)
    trainer = build_trainer_config(config.raw, "pendulum", spec.reward_threshold)
    trainer = replace(trainer, max_generations=3, population=16)
    scen = Scenario(spec, "vanilla")
    run_droid(scen, dataset.subset(2), 60, trainer, np.random.default_rng(1), eval_episodes=2)
    purity = scen.target_transitions == 0

    n_records = len(records)
    ok = within and all_ok and parity and purity and n_records <= 36
    checklist(
        10, "budgets respected, dataset parity byte-exact, offline purity", ok,
        f"{n_records} records, max transitions "
        f"{max(r.transitions_used for r in records)}, parity={parity}, purity={purity}",
    )


def test_criterion_11_bayrn_dominates_udr(protocol_cell):
    _, records, artifacts = protocol_cell
    udr_best = max(c["raw_return"] for c in artifacts.udr_configs)
    bayrn = [r for r in records if r.method == "bayrn" and r.iteration > 0]
    ok = bool(bayrn) and all(r.raw_return >= udr_best - 1e-9 for r in bayrn)
    checklist(
        11, "BayRn best-observed never falls below its UDR seeding", ok,
        f"UDR best {udr_best:.1f}; BayRn per-iteration "
        + ", ".join(f"{r.raw_return:.1f}" for r in bayrn),
    )


def test_criterion_12_determinism(full_config, tmp_path):
    cfg_dict = deep_merge(full_config, TRIMMED)
    cfg_dict["run"] = dict(cfg_dict["run"])
    cfg_dict["run"].update(
        {
            "environments": ["pendulum"],
            "settings": ["noisy"],
            "methods": ["simopt", "droid"],
            "iterations": 2,
            "trajectory_len": 100,
            "seeds": [0],
            "eval_episodes": 2,
        }
    )
    config = BenchmarkConfig.from_dict(cfg_dict)
    paths = []
    for attempt in ("a", "b"):
        records, _ = run_cell("pendulum", "noisy", 0, config)
        path = tmp_path / f"records_{attempt}.csv"
        export_results(records, path, "csv")
        paths.append(path)
    ok = paths[0].read_bytes() == paths[1].read_bytes()
    checklist(12, "re-running a cell reproduces records.csv byte-exactly", ok)


def test_criterion_13_collection_strategy_ablation(full_config, tmp_path):
    cfg_base = deep_merge(full_config, TRIMMED)
    details = []
    ok = True
    for env in ("pendulum", "cartpole"):
        for strategy in ("simopt-policy", "random", "prior-policy"):
            cfg_dict = deep_merge(cfg_base, {})
            cfg_dict["run"] = dict(cfg_dict["run"])
            cfg_dict["run"].update(
                {
                    "environments": [env],
                    "settings": ["noisy"],
                    "methods": ["droid", "dropo"],
                    "iterations": 1,
                    "trajectory_len": 200,
                    "seeds": [0],
                    "eval_episodes": 2,
                    "collection_strategy": strategy,
                }
            )
            config = BenchmarkConfig.from_dict(cfg_dict)
            records, artifacts = run_cell(env, "noisy", 0, config)
            completed = {
                (r.method, r.iteration) for r in records if r.status == "ok"
            }
            has_both = {("droid", 1), ("dropo", 1)} <= completed
            finite = all(
                np.isfinite(r.raw_return) for r in records if r.status == "ok"
            )
            key = strategy if strategy in artifacts.datasets else "simopt-policy"
            ds = artifacts.datasets[key]
            path = tmp_path / f"{env}_{strategy}.jsonl"
            ds.save(path)
            problems = validate_dataset(path, max_len=200)
            strategies_tagged = all(
                t.collection_strategy == strategy for t in ds.trajectories
            )
            cell_ok = has_both and finite and not problems and strategies_tagged
            ok = ok and cell_ok
            details.append(f"{env}/{strategy}:{'ok' if cell_ok else 'FAIL'}")
    checklist(13, "collection-strategy ablation runs end-to-end", ok, "; ".join(details))
