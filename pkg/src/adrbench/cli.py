"""Command-line entry point: run benchmark cells, aggregate, inspect datasets.

Configuration schema (YAML, deep-merged over the shipped defaults):

    run:                      # grid and protocol constants
      environments: [pendulum, cartpole, acrobot]
      settings:     [vanilla, noisy, unmodeled]
      methods:      [udr, bayrn, simopt, simopt1, droid, dropo]
      iterations: 5           # target-data iterations (x trajectory_len <= 1000)
      trajectory_len: 200     # transitions per collected trajectory
      seeds: [0, 1, 2]
      eval_episodes: 10       # final-evaluation episodes per record
      collection_strategy: simopt-policy   # | random | prior-policy
    environments:             # per-environment physics and calibration
      <name>:
        dt, substeps, horizon, episode_len, action_bounds,
        noise_variance, reward_threshold, worst_ref,
        ground_truth: {param: value, ...}, search_factor: [lo, hi],
        unmodeled: [param, ...], trainer: {optional overrides}
    trainer:                  # policy-search hyperparameters
      gamma, population, elites, episodes_per_candidate, max_generations,
      episode_len, init_std, extra_std, architecture, hidden
    methods:                  # per-method hyperparameters
      udr: {n_configs}, bayrn: {eval_episodes, gp_length_scale, ...},
      simopt: {kl_bound, samples_per_update, updates_per_iteration, w1, w2},
      droid: {cma_budget, sigma0}, dropo: {cma_budget, sigma0, epsilon_grid}

Results land in ``<out>/<run-id>/`` as ``records.csv`` (deterministic,
byte-stable across re-runs), ``records.json`` (adds wall_time), ``manifest.json``,
plus ``datasets/``, ``policies/``, ``traces/``. The run id hashes the resolved
config, so re-runs with new filters append new cells to the same directory
and never mutate existing ones. ``ADR_BENCH_SEED_OFFSET`` shifts all seeds
(cluster sharding). Exit codes: 0 success, 1 configuration error, 2 partial
(some cells carry diagnostic records).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

import adrbench
from adrbench.adr.scenario import SETTINGS
from adrbench.config import ConfigError, load_config
from adrbench.harness import (
    METHODS,
    BenchmarkConfig,
    aggregate,
    export_results,
    import_results,
    run_benchmark,
)
from adrbench.trajectory import Dataset, DatasetFormatError, validate_dataset

_ENV_CHOICES = ("pendulum", "cartpole", "acrobot")


def _parse_filter(value: str | None, valid: tuple, label: str) -> tuple | None:
    if value is None:
        return None
    items = tuple(v.strip() for v in value.split(",") if v.strip())
    unknown = [v for v in items if v not in valid]
    if unknown:
        raise ConfigError(
            f"unknown {label} {unknown}; valid {label}s: {', '.join(valid)}"
        )
    return items


def _run_id(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def cmd_run(args) -> int:
    try:
        raw = load_config(args.config)
        methods = _parse_filter(args.method, METHODS, "method")
        envs = _parse_filter(args.env, _ENV_CHOICES, "environment")
        settings = _parse_filter(args.setting, SETTINGS, "setting")
        run = dict(raw["run"])
        if methods:
            run["methods"] = list(methods)
        if envs:
            run["environments"] = list(envs)
        if settings:
            run["settings"] = list(settings)
        if args.seed is not None:
            run["seeds"] = [int(s) for s in str(args.seed).split(",")]
        if args.strategy:
            if args.strategy not in ("simopt-policy", "random", "prior-policy"):
                raise ConfigError(
                    f"unknown strategy {args.strategy!r}; valid: simopt-policy, "
                    "random, prior-policy"
                )
            run["collection_strategy"] = args.strategy
        filtered = dict(raw)
        filtered["run"] = run
        seed_offset = int(os.environ.get("ADR_BENCH_SEED_OFFSET", "0"))
        config = BenchmarkConfig.from_dict(filtered, seed_offset=seed_offset)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    run_dir = Path(args.out) / _run_id(raw)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S")

    records = run_benchmark(config, out_dir=run_dir, jobs=args.jobs)

    csv_path = run_dir / "records.csv"
    existing = import_results(csv_path) if csv_path.exists() else []
    existing_keys = {(r.method, r.env, r.setting, r.seed) for r in existing}
    merged = existing + [
        r for r in records if (r.method, r.env, r.setting, r.seed) not in existing_keys
    ]
    export_results(merged, csv_path, "csv")
    export_results(merged, run_dir / "records.json", "json")

    manifest_path = run_dir / "manifest.json"
    manifest = (
        json.loads(manifest_path.read_text())
        if manifest_path.exists()
        else {
            "run_id": _run_id(raw),
            "config_path": str(args.config) if args.config else None,
            "config_snapshot": raw,
            "versions": {
                "adrbench": adrbench.__version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "invocations": [],
        }
    )
    manifest["invocations"].append(
        {
            "started": started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "filters": {
                "methods": list(config.methods),
                "environments": list(config.environments),
                "settings": list(config.settings),
                "seeds": list(config.seeds),
                "collection_strategy": config.collection_strategy,
            },
            "new_records": len(merged) - len(existing),
        }
    )
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str))

    n_bad = sum(1 for r in records if r.status != "ok")
    print(f"{len(records)} records ({n_bad} diagnostic) -> {run_dir}")
    return 2 if n_bad else 0


def cmd_aggregate(args) -> int:
    run_dir = Path(args.run_dir)
    csv_path = run_dir / "records.csv"
    if not csv_path.exists():
        print(f"no records found in {run_dir}", file=sys.stderr)
        return 1
    records = import_results(csv_path)
    if not records:
        print(f"no records found in {run_dir}", file=sys.stderr)
        return 1
    rows = aggregate(records)
    out_path = run_dir / f"summary.{args.format}"
    if args.format == "json":
        out_path.write_text(json.dumps(rows, indent=2))
    else:
        import csv as csv_mod

        with open(out_path, "w", newline="") as fh:
            writer = csv_mod.DictWriter(fh, fieldnames=list(rows[0]) if rows else [])
            writer.writeheader()
            writer.writerows(rows)
    for row in rows:
        print(
            f"{row['env']:9s} {row['setting']:9s} {row['method']:8s} "
            f"it={row['iteration']} mean={row['mean_normalized_return']:+.3f} "
            f"sd={row['sd_normalized_return']:.3f} n={row['n_seeds']}"
            + ("  [partial]" if row["partial"] else "")
        )
    print(f"summary -> {out_path}")
    return 0


def cmd_dataset(args) -> int:
    run_dir = Path(args.run_dir)
    paths = sorted((run_dir / "datasets").glob("*.jsonl"))
    if not paths:
        print(f"no datasets found in {run_dir}", file=sys.stderr)
        return 1
    status = 0
    for path in paths:
        if args.action == "show":
            ds = Dataset.load(path)
            print(f"{path.name}: {len(ds)} trajectories, {ds.total_transitions} transitions")
            for traj in ds.trajectories:
                print(
                    f"  iteration={traj.iteration_index} length={len(traj)} "
                    f"strategy={traj.collection_strategy} "
                    f"noise_variance={traj.noise_variance:g} diverged={traj.diverged}"
                )
        else:  # validate
            try:
                problems = validate_dataset(path)
            except DatasetFormatError as exc:
                print(f"{path.name}: CORRUPT ({exc})")
                status = 1
                continue
            if problems:
                status = 1
                for problem in problems:
                    print(f"{path.name}: {problem}")
            else:
                print(f"{path.name}: ok")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adr-bench",
        description="Adaptive domain randomization benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute benchmark cells")
    p_run.add_argument("--config", type=str, default=None, help="YAML config overriding defaults")
    p_run.add_argument("--method", type=str, default=None, help="comma-separated method filter")
    p_run.add_argument("--env", type=str, default=None, help="comma-separated environment filter")
    p_run.add_argument("--setting", type=str, default=None, help="comma-separated setting filter")
    p_run.add_argument("--seed", type=str, default=None, help="comma-separated seed list")
    p_run.add_argument("--strategy", type=str, default=None, help="offline collection strategy")
    p_run.add_argument("--out", type=str, default="results", help="output root directory")
    p_run.add_argument("--jobs", type=int, default=1, help="concurrent cells")
    p_run.set_defaults(func=cmd_run)

    p_agg = sub.add_parser("aggregate", help="summarize a run directory")
    p_agg.add_argument("run_dir", type=str)
    p_agg.add_argument("--format", choices=("csv", "json"), default="csv")
    p_agg.set_defaults(func=cmd_aggregate)

    p_ds = sub.add_parser("dataset", help="inspect or validate collected datasets")
    p_ds.add_argument("run_dir", type=str)
    p_ds.add_argument("action", choices=("show", "validate"))
    p_ds.set_defaults(func=cmd_dataset)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
