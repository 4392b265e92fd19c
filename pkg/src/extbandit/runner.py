"""Seeded sweeps over (task, policy, repetition) cells with a resumable manifest."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ConfigError,
    EnvironmentFailure,
    PolicyConfig,
    RunTrace,
    derive_seed,
    environment_seed,
)
from .config import Experiment
from .environments import TaskSpec
from .episode import run_episode

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved.json"
CELLS_DIR = "cells"
RESULTS_HEADER = ("policy", "repetition", "t", "arm", "reward")
PENDING, COMPLETE, FAILED = "pending", "complete", "failed"


def fmt(x: float) -> str:
    return repr(float(x))


def results_path(out: Path, task_id: str) -> Path:
    return out / f"{task_id}.results.csv"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def play_cell(task: TaskSpec, policy: PolicyConfig, horizon: int, base_seed: int,
              repetition: int) -> RunTrace:
    """Episode of one sweep cell; reward streams are shared by all policies."""
    return run_episode(
        task, policy, horizon,
        seed=environment_seed(base_seed, task.task_id, repetition),
        repetition=repetition,
        policy_seed=derive_seed(base_seed, task.task_id, policy.policy_id, repetition),
    )


def run_cell(task: TaskSpec, policy: PolicyConfig, horizon: int, base_seed: int,
             repetition: int) -> str:
    """Play one cell and return its rows as CSV text (no header)."""
    trace = play_cell(task, policy, horizon, base_seed, repetition)
    pid = policy.policy_id
    return "".join(
        f"{pid},{repetition},{t},{a},{fmt(r)}\n"
        for t, (a, r) in enumerate(zip(trace.arms.tolist(), trace.rewards.tolist()), start=1)
    )


def _cell_job(args):
    task, policy, horizon, seed, rep = args
    try:
        return COMPLETE, run_cell(task, policy, horizon, seed, rep)
    except EnvironmentFailure as exc:
        return FAILED, str(exc)


@dataclass
class RunSummary:
    completed: int
    failed: int
    skipped: int
    errors: list[str]

    @property
    def exit_code(self) -> int:
        if not self.failed:
            return 0
        return 3 if self.completed + self.skipped == 0 else 1


class Manifest:
    def __init__(self, digest: str, base_seed: int, horizon: int, cells: list[dict]):
        self.digest = digest
        self.base_seed = base_seed
        self.horizon = horizon
        self.cells = cells

    @classmethod
    def fresh(cls, exp: Experiment) -> "Manifest":
        cells = [
            {"task": t.task_id, "policy": p.policy_id, "repetition": r, "status": PENDING}
            for t in exp.tasks for p in exp.policies for r in range(exp.repetitions)
        ]
        return cls(exp.digest, exp.seed, exp.horizon, cells)

    @classmethod
    def read(cls, out: Path) -> "Manifest":
        data = json.loads((out / MANIFEST).read_text(encoding="utf-8"))
        return cls(data["config_digest"], data["base_seed"], data["horizon"], data["cells"])

    def to_text(self) -> str:
        data = {
            "config_digest": self.digest,
            "tool_version": __version__,
            "base_seed": self.base_seed,
            "horizon": self.horizon,
            "cells": self.cells,
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def write(self, out: Path) -> None:
        tmp = out / (MANIFEST + ".tmp")
        write_text(tmp, self.to_text())
        os.replace(tmp, out / MANIFEST)

    def key(self, cell) -> tuple:
        return cell["task"], cell["policy"], cell["repetition"]

    @property
    def complete(self) -> bool:
        return all(c["status"] == COMPLETE for c in self.cells)


def cell_path(out: Path, task_id: str, policy_id: str, rep: int) -> Path:
    return out / CELLS_DIR / task_id / policy_id / f"{rep}.csv"


def run_sweep(exp: Experiment, out: Path | str, parallel: int = 1, resume: bool = False
              ) -> RunSummary:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = None
    if resume and (out / MANIFEST).is_file():
        manifest = Manifest.read(out)
        if manifest.digest != exp.digest:
            raise ConfigError("config changed since the run in this directory started")
        for c in manifest.cells:
            if c["status"] == COMPLETE and not cell_path(out, *manifest.key(c)).is_file():
                c["status"] = PENDING
        if manifest.complete and all(results_path(out, t.task_id).is_file() for t in exp.tasks):
            return RunSummary(0, 0, len(manifest.cells), [])
    if manifest is None:
        manifest = Manifest.fresh(exp)
        write_text(out / RESOLVED_CONFIG, json.dumps(exp.resolved(), indent=2, sort_keys=True)
                   + "\n")
    manifest.write(out)

    tasks = {t.task_id: t for t in exp.tasks}
    policies = {p.policy_id: p for p in exp.policies}
    todo = [c for c in manifest.cells if c["status"] != COMPLETE]
    skipped = len(manifest.cells) - len(todo)
    jobs = [(tasks[c["task"]], policies[c["policy"]], exp.horizon, exp.seed, c["repetition"])
            for c in todo]
    done = failed = 0
    errors = []
    last_flush = time.monotonic()

    def record(cell, status, payload):
        nonlocal done, failed, last_flush
        if status == COMPLETE:
            write_text(cell_path(out, *manifest.key(cell)), payload)
            cell["status"] = COMPLETE
            cell.pop("error", None)
            done += 1
        else:
            cell["status"] = FAILED
            cell["error"] = payload
            errors.append(payload)
            failed += 1
        if time.monotonic() - last_flush > 1.0:
            manifest.write(out)
            last_flush = time.monotonic()

    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for cell, (status, payload) in zip(todo, pool.map(_cell_job, jobs, chunksize=1)):
                record(cell, status, payload)
    else:
        for cell, job in zip(todo, jobs):
            record(cell, *_cell_job(job))
    manifest.write(out)
    merge_results(exp, out, manifest)
    return RunSummary(done, failed, skipped, errors)


def merge_results(exp: Experiment, out: Path, manifest: Manifest) -> None:
    status = {manifest.key(c): c["status"] for c in manifest.cells}
    header = ",".join(RESULTS_HEADER) + "\n"
    for task in exp.tasks:
        keys = [(task.task_id, p.policy_id, r) for p in exp.policies
                for r in range(exp.repetitions)]
        if any(status.get(k) != COMPLETE for k in keys):
            continue
        parts = [header] + [cell_path(out, *k).read_text(encoding="utf-8") for k in keys]
        write_text(results_path(out, task.task_id), "".join(parts))


# --- reading results back --------------------------------------------------


@dataclass
class TaskResults:
    task_id: str
    arms: dict[str, np.ndarray]      # policy -> [reps x T] arm indices
    rewards: dict[str, np.ndarray]   # policy -> [reps x T] rewards
    repetitions: dict[str, list[int]]


def read_results(path: Path, task_id: str, horizon: int) -> TaskResults:
    rows: dict[str, dict[int, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RESULTS_HEADER:
            raise ConfigError(f"{path}: unexpected header {header}")
        for row in reader:
            pid, rep, t, arm, reward = row
            rows.setdefault(pid, {}).setdefault(int(rep), []).append((int(arm), float(reward)))
    arms, rewards, reps = {}, {}, {}
    for pid, by_rep in rows.items():
        keep = sorted(r for r, seq in by_rep.items() if len(seq) == horizon)
        if not keep:
            continue
        arms[pid] = np.array([[a for a, _ in by_rep[r]] for r in keep], dtype=np.int64)
        rewards[pid] = np.array([[x for _, x in by_rep[r]] for r in keep], dtype=float)
        reps[pid] = keep
    return TaskResults(task_id, arms, rewards, reps)
