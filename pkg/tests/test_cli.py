import json

import pytest
import yaml

from adrbench.cli import main

TINY = {
    "run": {
        "environments": ["pendulum"],
        "settings": ["vanilla"],
        "methods": ["droid"],
        "iterations": 2,
        "trajectory_len": 100,
        "seeds": [0],
        "eval_episodes": 2,
        "collection_strategy": "prior-policy",
    },
    "trainer": {
        "max_generations": 4,
        "population": 16,
        "elites": 4,
        "episodes_per_candidate": 2,
        "restarts": 0,
    },
    "methods": {"droid": {"cma_budget": 100}},
}


@pytest.fixture(scope="module")
def tiny_yaml(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return str(path)


@pytest.fixture(scope="module")
def completed_run(tiny_yaml, tmp_path_factory):
    out = tmp_path_factory.mktemp("results")
    code = main(["run", "--config", tiny_yaml, "--out", str(out)])
    assert code == 0
    run_dir = next(out.iterdir())
    return out, run_dir


class TestRun:
    def test_record_count(self, completed_run):
        _, run_dir = completed_run
        lines = (run_dir / "records.csv").read_text().strip().splitlines()
        assert len(lines) - 1 == 3  # iterations 0..2 for the single method

    def test_manifest_self_describing(self, completed_run):
        _, run_dir = completed_run
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["run_id"] == run_dir.name
        assert manifest["config_snapshot"]["run"]["iterations"] == 2
        assert manifest["invocations"]
        assert "numpy" in manifest["versions"]

    def test_rerun_is_byte_identical_and_appends_nothing(self, completed_run, tiny_yaml):
        out, run_dir = completed_run
        before = (run_dir / "records.csv").read_bytes()
        code = main(["run", "--config", tiny_yaml, "--out", str(out)])
        assert code == 0
        after = (run_dir / "records.csv").read_bytes()
        assert before == after

    def test_new_filter_appends_new_cells(self, completed_run, tiny_yaml):
        out, run_dir = completed_run
        before = (run_dir / "records.csv").read_text().strip().splitlines()
        code = main(
            ["run", "--config", tiny_yaml, "--out", str(out), "--seed", "1"]
        )
        assert code == 0
        after = (run_dir / "records.csv").read_text().strip().splitlines()
        assert len(after) == len(before) + 3  # seed 1's three records appended
        assert set(before[1:]).issubset(set(after[1:]))  # old rows untouched

    def test_invalid_setting_exits_1(self, tiny_yaml, tmp_path, capsys):
        code = main(
            ["run", "--config", tiny_yaml, "--out", str(tmp_path), "--setting", "pristine"]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "vanilla" in err and "noisy" in err and "unmodeled" in err

    def test_invalid_method_exits_1(self, tiny_yaml, tmp_path, capsys):
        code = main(
            ["run", "--config", tiny_yaml, "--out", str(tmp_path), "--method", "sysid"]
        )
        assert code == 1
        assert "droid" in capsys.readouterr().err

    def test_missing_config_exits_1(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)])
        assert code == 1

    def test_seed_offset_env_var(self, tiny_yaml, tmp_path, monkeypatch):
        monkeypatch.setenv("ADR_BENCH_SEED_OFFSET", "50")
        code = main(["run", "--config", tiny_yaml, "--out", str(tmp_path)])
        assert code == 0
        run_dir = next(tmp_path.iterdir())
        rows = (run_dir / "records.csv").read_text().strip().splitlines()[1:]
        assert all(row.split(",")[4] == "50" for row in rows)  # seed column

    def test_parallel_jobs(self, tiny_yaml, tmp_path):
        code = main(
            ["run", "--config", tiny_yaml, "--out", str(tmp_path), "--jobs", "2",
             "--seed", "0,1"]
        )
        assert code == 0
        run_dir = next(tmp_path.iterdir())
        rows = (run_dir / "records.csv").read_text().strip().splitlines()[1:]
        assert len(rows) == 6  # two cells x three iteration points


class TestAggregate:
    def test_summary_written(self, completed_run, capsys):
        _, run_dir = completed_run
        code = main(["aggregate", str(run_dir)])
        assert code == 0
        assert (run_dir / "summary.csv").exists()
        out = capsys.readouterr().out
        assert "droid" in out

    def test_json_format_parseable(self, completed_run):
        _, run_dir = completed_run
        code = main(["aggregate", str(run_dir), "--format", "json"])
        assert code == 0
        rows = json.loads((run_dir / "summary.json").read_text())
        assert rows and {"method", "env", "setting", "iteration"} <= set(rows[0])

    def test_empty_dir_exits_1(self, tmp_path, capsys):
        code = main(["aggregate", str(tmp_path)])
        assert code == 1
        assert str(tmp_path) in capsys.readouterr().err


class TestDataset:
    def test_show_lists_strategy(self, completed_run, capsys):
        _, run_dir = completed_run
        code = main(["dataset", str(run_dir), "show"])
        assert code == 0
        out = capsys.readouterr().out
        assert "prior-policy" in out and "length=100" in out

    def test_validate_ok(self, completed_run, capsys):
        _, run_dir = completed_run
        code = main(["dataset", str(run_dir), "validate"])
        assert code == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_corrupt_names_line(self, completed_run, tmp_path, capsys):
        _, run_dir = completed_run
        src = next((run_dir / "datasets").glob("*.jsonl"))
        bad_dir = tmp_path / "datasets"
        bad_dir.mkdir()
        lines = src.read_text().splitlines()
        lines[3] = lines[3][: len(lines[3]) // 2]  # truncate a record
        (bad_dir / "bad.jsonl").write_text("\n".join(lines))
        code = main(["dataset", str(tmp_path), "validate"])
        assert code == 1
        assert "line 4" in capsys.readouterr().out

    def test_missing_datasets_exit_1(self, tmp_path, capsys):
        code = main(["dataset", str(tmp_path), "validate"])
        assert code == 1
