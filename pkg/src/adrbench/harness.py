"""Protocol orchestration: the method x environment x setting x seed grid.

Each cell runs the full pipeline under a shared budget of
``iterations x trajectory_len`` target transitions: a shared iteration-0
policy trained on the conservative prior, the online methods (one trajectory
per iteration), and the offline methods re-run on the cumulative dataset at
every iteration count. Offline methods consume exactly the trajectories the
online run logged (byte-identical data parity) unless another collection
strategy is configured. Every cell is bit-reproducible from (config, seed).
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adrbench.adr import (
    BayrnConfig,
    Scenario,
    collect_offline_dataset,
    run_bayrn,
    run_droid,
    run_dropo,
    run_simopt,
    run_udr,
)
from adrbench.adr.scenario import SETTINGS
from adrbench.config import build_spec, build_trainer_config
from adrbench.dist import DomainDistribution, prior
from adrbench.optim.reps import RepsConfig
from adrbench.policy import Policy, train_policy
from adrbench.trajectory import Dataset

log = logging.getLogger(__name__)

METHODS = ("udr", "bayrn", "simopt", "simopt1", "droid", "dropo")
OFFLINE_METHODS = ("droid", "dropo")

# fixed stream identifiers so every (cell, method) rng is reproducible
_STREAM_BASE = 9172031
_ENV_IDS = {"pendulum": 1, "cartpole": 2, "acrobot": 3}
_SETTING_IDS = {"vanilla": 1, "noisy": 2, "unmodeled": 3}
_METHOD_IDS = {
    "prior": 0,
    "udr": 1,
    "bayrn": 2,
    "simopt": 3,
    "simopt1": 4,
    "droid": 5,
    "dropo": 6,
    "collect": 7,
}

CSV_COLUMNS = (
    "method",
    "env",
    "setting",
    "iteration",
    "seed",
    "raw_return",
    "normalized_return",
    "transitions_used",
    "status",
    "inferred_distribution",
)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Validated view of the resolved configuration's run section."""

    environments: tuple[str, ...]
    settings: tuple[str, ...]
    methods: tuple[str, ...]
    iterations: int
    trajectory_len: int
    seeds: tuple[int, ...]
    eval_episodes: int
    collection_strategy: str
    raw: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        for env in self.environments:
            if env not in _ENV_IDS:
                raise ValueError(
                    f"unknown environment {env!r}; valid: {sorted(_ENV_IDS)}"
                )
        for setting in self.settings:
            if setting not in SETTINGS:
                raise ValueError(f"unknown setting {setting!r}; valid: {list(SETTINGS)}")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}; valid: {list(METHODS)}")
        if self.iterations * self.trajectory_len > 1000:
            raise ValueError(
                f"budget violation: {self.iterations} iterations x "
                f"{self.trajectory_len} transitions exceeds 1000"
            )
        if not self.seeds:
            raise ValueError("seeds must be non-empty")

    @property
    def budget(self) -> int:
        return self.iterations * self.trajectory_len

    @classmethod
    def from_dict(cls, config: dict, seed_offset: int = 0) -> "BenchmarkConfig":
        run = config["run"]
        return cls(
            environments=tuple(run["environments"]),
            settings=tuple(run["settings"]),
            methods=tuple(run["methods"]),
            iterations=int(run["iterations"]),
            trajectory_len=int(run["trajectory_len"]),
            seeds=tuple(int(s) + seed_offset for s in run["seeds"]),
            eval_episodes=int(run["eval_episodes"]),
            collection_strategy=str(run["collection_strategy"]),
            raw=config,
        )


@dataclass
class ResultRecord:
    """One benchmark measurement."""

    method: str
    env: str
    setting: str
    iteration: int
    seed: int
    raw_return: float
    normalized_return: float
    transitions_used: int
    inferred_distribution: dict | None = None
    wall_time: float | None = None
    status: str = "ok"

    def sort_key(self):
        return (self.env, self.setting, self.method, self.seed, self.iteration)


@dataclass
class CellArtifacts:
    """Reproducibility artifacts of one (env, setting, seed) cell."""

    datasets: dict[str, Dataset] = field(default_factory=dict)
    policies: dict[str, Policy] = field(default_factory=dict)
    traces: dict[str, list] = field(default_factory=dict)
    udr_configs: list[dict] = field(default_factory=list)


def normalized_return(raw: float, threshold: float, worst_ref: float | None = None) -> float:
    """Map a raw return to the threshold-relative scale (1.0 = threshold).

    Positive-scale rewards divide by the threshold. Cost-style rewards
    (negative returns, e.g. the pendulum) are affinely mapped so that the
    zero-action reference return lands at 0 and the threshold at 1.
    """
    if worst_ref is None:
        if threshold <= 0:
            raise ValueError("positive-scale normalization needs threshold > 0")
        return raw / threshold
    if threshold == worst_ref:
        raise ValueError("threshold equals worst_ref; normalization undefined")
    return (raw - worst_ref) / (threshold - worst_ref)


def _rng_for(seed: int, env: str, setting: str, stream: str) -> np.random.Generator:
    ss = np.random.SeedSequence(
        [_STREAM_BASE, seed, _ENV_IDS[env], _SETTING_IDS[setting], _METHOD_IDS[stream]]
    )
    return np.random.default_rng(ss)


def _dist_dict(dist: DomainDistribution | None) -> dict | None:
    return None if dist is None else dist.to_dict()


def run_cell(
    env: str, setting: str, seed: int, config: BenchmarkConfig
) -> tuple[list[ResultRecord], CellArtifacts]:
    """All configured methods on one (env, setting, seed) cell."""
    spec = build_spec(env, config.raw)
    trainer_cfg = build_trainer_config(config.raw, env, spec.reward_threshold)
    methods_cfg = config.raw["methods"]
    records: list[ResultRecord] = []
    artifacts = CellArtifacts()

    def norm(raw: float) -> float:
        return normalized_return(raw, spec.reward_threshold, spec.worst_ref)

    def emit(method, iteration, raw, transitions, dist=None, wall=None, status="ok"):
        rec = ResultRecord(
            method=method,
            env=env,
            setting=setting,
            iteration=iteration,
            seed=seed,
            raw_return=float(raw),
            normalized_return=norm(raw) if np.isfinite(raw) else float("nan"),
            transitions_used=int(transitions),
            inferred_distribution=_dist_dict(dist),
            wall_time=wall,
            status=status,
        )
        records.append(rec)
        return rec

    # --- shared iteration-0: one policy trained on the conservative prior ---
    t0 = time.perf_counter()
    prior_rng = _rng_for(seed, env, setting, "prior")
    prior_scenario = Scenario(spec, setting)
    prior_dist = prior(prior_scenario.param_space)
    prior_result = train_policy(
        prior_dist,
        spec,
        trainer_cfg,
        rng=prior_rng,
        param_space=prior_scenario.param_space,
        embed=prior_scenario.embed,
    )
    prior_return = prior_scenario.evaluate_on_target(
        prior_result.policy, config.eval_episodes, prior_rng
    )
    prior_wall = time.perf_counter() - t0
    artifacts.policies["prior_it0"] = prior_result.policy
    for method in config.methods:
        emit(method, 0, prior_return, 0, dist=prior_dist, wall=prior_wall)

    budget = config.budget
    need_simopt_data = config.collection_strategy == "simopt-policy" and any(
        m in config.methods for m in OFFLINE_METHODS
    )

    def check_budget(method: str, scenario: Scenario) -> bool:
        if scenario.budget_used > budget:
            log.error(
                "%s/%s/%s seed %d: budget violated (%d > %d); cell aborted",
                method,
                env,
                setting,
                seed,
                scenario.budget_used,
                budget,
            )
            emit(
                method,
                config.iterations,
                float("nan"),
                scenario.budget_used,
                status=f"budget-violation:{scenario.budget_used}>{budget}",
            )
            return False
        return True

    # --- online: trajectory-discrepancy method (also the data source) ---
    simopt_outcome = None
    if "simopt" in config.methods or need_simopt_data:
        so_cfg = methods_cfg["simopt"]
        reps_cfg = RepsConfig(
            kl_bound=float(so_cfg["kl_bound"]),
            samples_per_update=int(so_cfg["samples_per_update"]),
            updates_per_iteration=int(so_cfg["updates_per_iteration"]),
        )
        t0 = time.perf_counter()
        scenario = Scenario(spec, setting)
        simopt_outcome = run_simopt(
            scenario,
            prior_result.policy,
            config.iterations,
            reps_cfg,
            trainer_cfg,
            _rng_for(seed, env, setting, "simopt"),
            eval_episodes=config.eval_episodes,
            trajectory_len=config.trajectory_len,
            seed=seed,
            w1=float(so_cfg["w1"]),
            w2=float(so_cfg["w2"]),
        )
        wall = time.perf_counter() - t0
        artifacts.datasets["simopt-policy"] = simopt_outcome.extras["dataset"]
        artifacts.traces["simopt"] = simopt_outcome.extras["trace"]
        if "simopt" in config.methods and check_budget("simopt", scenario):
            for it in simopt_outcome.iterations:
                emit("simopt", it.iteration, it.raw_return, it.transitions_used,
                     dist=it.inferred, wall=wall)
                artifacts.policies[f"simopt_it{it.iteration}"] = it.policy

    if "simopt1" in config.methods:
        so_cfg = methods_cfg["simopt"]
        reps_cfg = RepsConfig(
            kl_bound=float(so_cfg["kl_bound"]),
            samples_per_update=int(so_cfg["samples_per_update"]),
            updates_per_iteration=int(so_cfg["updates_per_iteration"]),
        )
        t0 = time.perf_counter()
        scenario = Scenario(spec, setting)
        outcome = run_simopt(
            scenario,
            prior_result.policy,
            config.iterations,
            reps_cfg,
            trainer_cfg,
            _rng_for(seed, env, setting, "simopt1"),
            single_iteration=True,
            eval_episodes=config.eval_episodes,
            trajectory_len=config.trajectory_len,
            seed=seed,
            w1=float(so_cfg["w1"]),
            w2=float(so_cfg["w2"]),
        )
        wall = time.perf_counter() - t0
        artifacts.traces["simopt1"] = outcome.extras["trace"]
        if check_budget("simopt1", scenario):
            for it in outcome.iterations:
                emit("simopt1", it.iteration, it.raw_return, it.transitions_used,
                     dist=it.inferred, wall=wall)
                artifacts.policies[f"simopt1_it{it.iteration}"] = it.policy

    # --- offline methods on cumulative datasets at each iteration count ---
    offline_requested = [m for m in OFFLINE_METHODS if m in config.methods]
    if offline_requested:
        if config.collection_strategy == "simopt-policy":
            dataset = simopt_outcome.extras["dataset"]
        else:
            collect_rng = _rng_for(seed, env, setting, "collect")
            scenario = Scenario(spec, setting)
            dataset = collect_offline_dataset(
                scenario,
                config.collection_strategy,
                config.iterations,
                collect_rng,
                trajectory_len=config.trajectory_len,
                prior_policy=prior_result.policy,
                seed=seed,
            )
            artifacts.datasets[config.collection_strategy] = dataset

        for method in offline_requested:
            t0 = time.perf_counter()
            scenario = Scenario(spec, setting)
            rng = _rng_for(seed, env, setting, method)
            method_records = []
            for k in range(1, config.iterations + 1):
                subset = dataset.subset(k)
                if method == "droid":
                    d_cfg = methods_cfg["droid"]
                    outcome = run_droid(
                        scenario,
                        subset,
                        int(d_cfg["cma_budget"]),
                        trainer_cfg,
                        rng.spawn(1)[0],
                        eval_episodes=config.eval_episodes,
                        sigma0=float(d_cfg["sigma0"]),
                    )
                else:
                    d_cfg = methods_cfg["dropo"]
                    outcome = run_dropo(
                        scenario,
                        subset,
                        epsilon_grid=tuple(d_cfg["epsilon_grid"]),
                        cma_budget=int(d_cfg["cma_budget"]),
                        trainer_config=trainer_cfg,
                        rng=rng.spawn(1)[0],
                        eval_episodes=config.eval_episodes,
                        sigma0=float(d_cfg["sigma0"]),
                    )
                it = outcome.iterations[0]
                method_records.append((k, it))
                artifacts.policies[f"{method}_it{k}"] = it.policy
                artifacts.traces.setdefault(method, []).append(
                    {"iteration": k, **{kk: vv for kk, vv in outcome.extras.items()
                                        if kk not in ("per_epsilon",)}}
                )
            wall = time.perf_counter() - t0
            if scenario.target_transitions != 0:
                raise AssertionError(
                    f"{method} performed {scenario.target_transitions} target "
                    "transitions; offline methods must not touch the target"
                )
            for k, it in method_records:
                if it.transitions_used > budget:
                    emit(method, k, float("nan"), it.transitions_used,
                         status=f"budget-violation:{it.transitions_used}>{budget}")
                    break
                emit(method, k, it.raw_return, it.transitions_used,
                     dist=it.inferred, wall=wall)

    # --- random-search baseline and return-driven bound adaptation ---
    udr_outcome = None
    if "udr" in config.methods or "bayrn" in config.methods:
        t0 = time.perf_counter()
        scenario = Scenario(spec, setting)
        udr_outcome = run_udr(
            scenario,
            int(methods_cfg["udr"]["n_configs"]),
            trainer_cfg,
            _rng_for(seed, env, setting, "udr"),
            eval_episodes=config.eval_episodes,
        )
        wall = time.perf_counter() - t0
        artifacts.udr_configs = [
            {
                "env": env,
                "setting": setting,
                "seed": seed,
                "config_index": c["index"],
                "lo": c["dist"].lo.tolist(),
                "hi": c["dist"].hi.tolist(),
                "raw_return": c["target_return"],
                "normalized_return": norm(c["target_return"]),
            }
            for c in udr_outcome.extras["configs"]
        ]
        if "udr" in config.methods and check_budget("udr", scenario):
            mean_ret = udr_outcome.iterations[0].raw_return
            for it in range(1, config.iterations + 1):
                emit("udr", it, mean_ret, 0, wall=wall)

    if "bayrn" in config.methods:
        b_cfg = methods_cfg["bayrn"]
        t0 = time.perf_counter()
        scenario = Scenario(spec, setting)
        outcome = run_bayrn(
            scenario,
            udr_outcome,
            config.iterations,
            trainer_cfg,
            _rng_for(seed, env, setting, "bayrn"),
            config=BayrnConfig(
                eval_episodes=int(b_cfg["eval_episodes"]),
                gp_length_scale=float(b_cfg["gp_length_scale"]),
                gp_noise_factor=float(b_cfg["gp_noise_factor"]),
                bo_starts=int(b_cfg["bo_starts"]),
            ),
            trajectory_len=config.trajectory_len,
        )
        wall = time.perf_counter() - t0
        if check_budget("bayrn", scenario):
            for it in outcome.iterations:
                emit("bayrn", it.iteration, it.raw_return, it.transitions_used,
                     dist=it.inferred, wall=wall)
                artifacts.policies[f"bayrn_it{it.iteration}"] = it.policy

    records.sort(key=ResultRecord.sort_key)
    return records, artifacts


def _run_cell_task(args):
    env, setting, seed, config = args
    return env, setting, seed, run_cell(env, setting, seed, config)


def run_benchmark(
    config: BenchmarkConfig,
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> list[ResultRecord]:
    """Execute the configured grid; optionally persist per-cell artifacts.

    Cells are independent; with ``jobs > 1`` they run in separate processes
    (artifact writing stays in this process, the single synchronized sink).
    Records come back in canonical (env, setting, method, seed, iteration)
    order either way.
    """
    cells = [
        (env, setting, seed)
        for env in config.environments
        for setting in config.settings
        for seed in config.seeds
    ]
    records: list[ResultRecord] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for env, setting, seed, (cell_records, artifacts) in pool.map(
                _run_cell_task, [(e, s, sd, config) for e, s, sd in cells]
            ):
                records.extend(cell_records)
                if out_dir is not None:
                    _write_artifacts(Path(out_dir), env, setting, seed, artifacts)
    else:
        for env, setting, seed in cells:
            cell_records, artifacts = run_cell(env, setting, seed, config)
            records.extend(cell_records)
            if out_dir is not None:
                _write_artifacts(Path(out_dir), env, setting, seed, artifacts)
    records.sort(key=ResultRecord.sort_key)
    return records


def _write_artifacts(out: Path, env: str, setting: str, seed: int, art: CellArtifacts):
    stem = f"{env}_{setting}_seed{seed}"
    for strategy, dataset in art.datasets.items():
        dataset.save(out / "datasets" / f"{stem}_{strategy}.jsonl")
    pol_dir = out / "policies"
    pol_dir.mkdir(parents=True, exist_ok=True)
    for key, policy in art.policies.items():
        if policy is not None:
            policy.save(pol_dir / f"{stem}_{key}.npz")
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    for method, rows in art.traces.items():
        with open(trace_dir / f"{stem}_{method}.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row, default=_json_fallback) + "\n")
    if art.udr_configs:
        path = out / "udr_configs.csv"
        exists = path.exists()
        with open(path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(art.udr_configs[0]))
            if not exists:
                writer.writeheader()
            for row in art.udr_configs:
                writer.writerow(
                    {k: json.dumps(v) if isinstance(v, list) else v for k, v in row.items()}
                )


def _json_fallback(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def aggregate(records: list[ResultRecord], expected_seeds: int | None = None) -> list[dict]:
    """Mean and standard deviation of normalized return per curve point.

    One row per (method, env, setting, iteration), averaged over seeds;
    groups with fewer seeds than expected are flagged partial.
    """
    groups: dict[tuple, list[ResultRecord]] = {}
    for rec in records:
        if rec.status != "ok":
            continue
        groups.setdefault((rec.method, rec.env, rec.setting, rec.iteration), []).append(rec)
    if expected_seeds is None:
        expected_seeds = max((len(v) for v in groups.values()), default=0)
    rows = []
    for (method, env, setting, iteration), recs in sorted(groups.items()):
        values = np.array([r.normalized_return for r in recs], dtype=float)
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        rows.append(
            {
                "method": method,
                "env": env,
                "setting": setting,
                "iteration": iteration,
                "mean_normalized_return": float(np.mean(values)),
                "sd_normalized_return": sd,
                "n_seeds": len(values),
                "partial": len(values) < expected_seeds,
            }
        )
    return rows


def export_results(records: list[ResultRecord], path: str | Path, format: str = "csv") -> None:
    """Write records with a stable schema.

    CSV columns are exactly ``CSV_COLUMNS`` in order; wall_time is
    deliberately excluded from the CSV so re-runs are byte-identical, and is
    carried by the JSON format instead.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=ResultRecord.sort_key)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in ordered:
                writer.writerow(
                    [
                        rec.method,
                        rec.env,
                        rec.setting,
                        rec.iteration,
                        rec.seed,
                        repr(rec.raw_return),
                        repr(rec.normalized_return),
                        rec.transitions_used,
                        rec.status,
                        "" if rec.inferred_distribution is None
                        else json.dumps(rec.inferred_distribution),
                    ]
                )
    elif format == "json":
        payload = [
            {
                "method": rec.method,
                "env": rec.env,
                "setting": rec.setting,
                "iteration": rec.iteration,
                "seed": rec.seed,
                "raw_return": rec.raw_return,
                "normalized_return": rec.normalized_return,
                "transitions_used": rec.transitions_used,
                "status": rec.status,
                "inferred_distribution": rec.inferred_distribution,
                "wall_time": rec.wall_time,
            }
            for rec in ordered
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
    else:
        raise ValueError(f"unknown format {format!r}; use csv or json")


def import_results(path: str | Path) -> list[ResultRecord]:
    """Inverse of :func:`export_results` (CSV drops wall_time by design)."""
    path = Path(path)
    records = []
    if path.suffix == ".json":
        with open(path) as fh:
            for row in json.load(fh):
                records.append(ResultRecord(**row))
        return records
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            records.append(
                ResultRecord(
                    method=row["method"],
                    env=row["env"],
                    setting=row["setting"],
                    iteration=int(row["iteration"]),
                    seed=int(row["seed"]),
                    raw_return=float(row["raw_return"]),
                    normalized_return=float(row["normalized_return"]),
                    transitions_used=int(row["transitions_used"]),
                    status=row["status"],
                    inferred_distribution=(
                        json.loads(row["inferred_distribution"])
                        if row["inferred_distribution"]
                        else None
                    ),
                )
            )
    return records
