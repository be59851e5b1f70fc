"""Target-domain trajectory and dataset containers with line-delimited persistence.

A trajectory records what a target-domain sensor would deliver: measured full
states (used for simulator resets), measured observations (what the policy
acted on), actions and rewards. The clean simulator states are kept alongside
for diagnostics only; inference methods must not read them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Transition:
    """One measured step: state, action, next state, reward (plus observations)."""

    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r: float
    obs: np.ndarray
    obs_next: np.ndarray


@dataclass
class Trajectory:
    """One episode of measured target-domain data.

    Arrays: ``actions`` (L, n_a), ``rewards`` (L,), ``states`` and
    ``true_states`` (L+1, n_latent), ``obs`` (L+1, n_s). ``states``/``obs``
    carry measurement noise when collected under the noisy setting;
    ``true_states`` never does.
    """

    actions: np.ndarray
    rewards: np.ndarray
    states: np.ndarray
    obs: np.ndarray
    true_states: np.ndarray
    diverged: bool = False
    collection_strategy: str = ""
    iteration_index: int = 0
    seed: int = 0
    noise_variance: float = 0.0
    policy_iteration: int | None = None

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def n_transitions(self) -> int:
        return self.actions.shape[0]

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def transitions(self) -> list[Transition]:
        return [
            Transition(
                s=self.states[t],
                a=self.actions[t],
                s_next=self.states[t + 1],
                r=float(self.rewards[t]),
                obs=self.obs[t],
                obs_next=self.obs[t + 1],
            )
            for t in range(len(self))
        ]

    def metadata(self) -> dict:
        return {
            "collection_strategy": self.collection_strategy,
            "iteration_index": self.iteration_index,
            "seed": self.seed,
            "noise_variance": self.noise_variance,
            "policy_iteration": self.policy_iteration,
            "diverged": self.diverged,
            "length": len(self),
        }


@dataclass
class Dataset:
    """Cumulative list of trajectories; trajectory k carries iteration_index k."""

    trajectories: list[Trajectory] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def total_transitions(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def append(self, traj: Trajectory) -> None:
        self.trajectories.append(traj)

    def subset(self, n_trajectories: int) -> "Dataset":
        """First n trajectories (the cumulative dataset at that iteration)."""
        return Dataset(self.trajectories[:n_trajectories])

    def all_transitions(self) -> list[Transition]:
        out: list[Transition] = []
        for traj in self.trajectories:
            out.extend(traj.transitions)
        return out

    def save(self, path: str | Path) -> None:
        """Write line-delimited JSON: a header line per trajectory, then its transitions."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for traj in self.trajectories:
                header = {"type": "trajectory", **traj.metadata()}
                fh.write(json.dumps(header) + "\n")
                for t in range(len(traj)):
                    rec = {
                        "type": "transition",
                        "iteration": traj.iteration_index,
                        "t": t,
                        "s": traj.states[t].tolist(),
                        "a": traj.actions[t].tolist(),
                        "s_next": traj.states[t + 1].tolist(),
                        "r": float(traj.rewards[t]),
                        "obs": traj.obs[t].tolist(),
                        "obs_next": traj.obs[t + 1].tolist(),
                        "s_true": traj.true_states[t].tolist(),
                        "s_true_next": traj.true_states[t + 1].tolist(),
                    }
                    fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        trajectories: list[Trajectory] = []
        current: dict | None = None
        rows: list[dict] = []

        def flush():
            if current is None:
                return
            trajectories.append(_assemble(current, rows))

        with open(path) as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetFormatError(line_no, f"invalid JSON: {exc}") from exc
                if rec.get("type") == "trajectory":
                    flush()
                    current = rec
                    rows = []
                elif rec.get("type") == "transition":
                    if current is None:
                        raise DatasetFormatError(line_no, "transition before trajectory header")
                    rows.append(rec)
                else:
                    raise DatasetFormatError(line_no, f"unknown record type {rec.get('type')!r}")
        flush()
        return cls(trajectories)


class DatasetFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _assemble(header: dict, rows: list[dict]) -> Trajectory:
    length = len(rows)
    if length != header.get("length", length):
        raise ValueError(
            f"trajectory {header.get('iteration_index')}: header says "
            f"{header.get('length')} transitions, found {length}"
        )
    states = np.array([r["s"] for r in rows] + [rows[-1]["s_next"]]) if rows else np.zeros((1, 0))
    true_states = (
        np.array([r["s_true"] for r in rows] + [rows[-1]["s_true_next"]])
        if rows
        else np.zeros((1, 0))
    )
    obs = np.array([r["obs"] for r in rows] + [rows[-1]["obs_next"]]) if rows else np.zeros((1, 0))
    return Trajectory(
        actions=np.array([r["a"] for r in rows]) if rows else np.zeros((0, 0)),
        rewards=np.array([r["r"] for r in rows]),
        states=states,
        obs=obs,
        true_states=true_states,
        diverged=bool(header.get("diverged", False)),
        collection_strategy=header.get("collection_strategy", ""),
        iteration_index=int(header.get("iteration_index", 0)),
        seed=int(header.get("seed", 0)),
        noise_variance=float(header.get("noise_variance", 0.0)),
        policy_iteration=header.get("policy_iteration"),
    )


def validate_dataset(path: str | Path, max_len: int = 200) -> list[str]:
    """Re-check dataset invariants; returns a list of problems (empty when valid).

    Raises :class:`DatasetFormatError` (with the line number) on corrupt lines.
    """
    ds = Dataset.load(path)
    problems: list[str] = []
    for k, traj in enumerate(ds.trajectories, start=1):
        if len(traj) > max_len:
            problems.append(f"trajectory {k}: length {len(traj)} exceeds {max_len}")
        if traj.iteration_index != k:
            problems.append(
                f"trajectory {k}: iteration_index {traj.iteration_index} breaks cumulative order"
            )
        for name in ("actions", "rewards", "states", "obs"):
            if not np.all(np.isfinite(getattr(traj, name))):
                problems.append(f"trajectory {k}: non-finite values in {name}")
    return problems
