"""Analysis, shape-report and synthetic-benchmark pipelines behind the CLI."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    DegenerateSupportError,
    InsufficientDataError,
    tuned_alpha,
    estimate_gaps,
    estimate_shape_constants,
)
from .config import Experiment, parse_config
from .core import ConfigError, PolicyConfig, derive_seed, environment_seed, make_rng
from .environments import (
    TaskSpec,
    arm_stream_head,
    draw,
    load_trace_table,
    parametric_arm,
    trace_rewards,
    trace_task,
)
from .metrics import (
    bootstrap_average_rank,
    max_so_far,
    proxy_regret_curve,
    sign_test,
    wins_ties_losses,
)
from .runner import (
    COMPLETE,
    MANIFEST,
    RESOLVED_CONFIG,
    Manifest,
    TaskResults,
    cell_path,
    csv_text,
    fmt,
    read_results,
    results_path,
    play_cell,
    write_text,
)

log = logging.getLogger(__name__)

BOOTSTRAP_ITERATIONS = 1000


class AnalysisError(ConfigError):
    pass


# --- analyze ----------------------------------------------------------------


def _load_run(results_dir: Path, allow_partial: bool) -> tuple[Experiment, Manifest]:
    if not (results_dir / MANIFEST).is_file():
        raise AnalysisError(f"no {MANIFEST} in {results_dir}")
    manifest = Manifest.read(results_dir)
    if not manifest.complete and not allow_partial:
        pending = sum(c["status"] != COMPLETE for c in manifest.cells)
        raise AnalysisError(f"{pending} cells incomplete; pass --allow-partial to analyze anyway")
    data = json.loads((results_dir / RESOLVED_CONFIG).read_text(encoding="utf-8"))
    return parse_config(data, "/", digest=manifest.digest), manifest


def _task_results(exp: Experiment, manifest: Manifest, out: Path, task: TaskSpec
                  ) -> TaskResults:
    path = results_path(out, task.task_id)
    if path.is_file():
        return read_results(path, task.task_id, exp.horizon)
    # partial run: assemble whatever cells finished
    arms, rewards, reps = {}, {}, {}
    for p in exp.policies:
        keep = [c["repetition"] for c in manifest.cells
                if c["task"] == task.task_id and c["policy"] == p.policy_id
                and c["status"] == COMPLETE
                and cell_path(out, task.task_id, p.policy_id, c["repetition"]).is_file()]
        rows = []
        for r in sorted(keep):
            text = cell_path(out, task.task_id, p.policy_id, r).read_text(encoding="utf-8")
            rows.append([line.split(",") for line in text.splitlines()])
        if rows:
            arms[p.policy_id] = np.array([[int(x[3]) for x in rr] for rr in rows])
            rewards[p.policy_id] = np.array([[float(x[4]) for x in rr] for rr in rows])
            reps[p.policy_id] = sorted(keep)
    return TaskResults(task.task_id, arms, rewards, reps)


def oracle_curves(task: TaskSpec, base_seed: int, repetitions, horizon: int) -> list[np.ndarray]:
    """Per-arm running maxima of single-arm episodes sharing the sweep's reward streams."""
    curves = []
    for arm in range(task.n_arms):
        rows = [max_so_far(arm_stream_head(task, arm, environment_seed(base_seed, task.task_id, r),
                                           horizon, r, pad=True))
                for r in repetitions]
        curves.append(np.vstack(rows))
    return curves


@dataclass
class AnalyzeReport:
    ranks: list[tuple]
    wtl: list[tuple]
    regret: list[tuple]
    pulls: list[tuple]


def analyze(results_dir: Path | str, reference: str, out: Path | str,
            allow_partial: bool = False, iterations: int = BOOTSTRAP_ITERATIONS) -> AnalyzeReport:
    results_dir, out = Path(results_dir), Path(out)
    exp, manifest = _load_run(results_dir, allow_partial)
    policy_ids = [p.policy_id for p in exp.policies]
    if reference not in policy_ids:
        raise AnalysisError(f"reference policy {reference!r} not in {policy_ids}")

    perf: dict[str, dict[str, np.ndarray]] = {}
    regret_rows, pull_rows = [], []
    for task in exp.tasks:
        res = _task_results(exp, manifest, results_dir, task)
        present = [p for p in policy_ids if p in res.rewards]
        if not present:
            continue
        curves = {p: max_so_far(res.rewards[p]) for p in present}
        if len(present) == len(policy_ids):
            perf[task.task_id] = curves
        reps = sorted(set().union(*(res.repetitions[p] for p in present)))
        oracles = oracle_curves(task, exp.seed, reps, exp.horizon)
        for p in present:
            pick = [reps.index(r) for r in res.repetitions[p]]
            reg = proxy_regret_curve(curves[p], [o[pick] for o in oracles])
            regret_rows += [(task.task_id, p, t, fmt(v)) for t, v in enumerate(reg, start=1)]
            counts = np.stack([np.bincount(a, minlength=task.n_arms) for a in res.arms[p]])
            pull_rows += [(task.task_id, p, i, fmt(v)) for i, v in enumerate(counts.mean(axis=0))]
    if not perf:
        raise AnalysisError(f"no complete results in {results_dir}")

    rng = make_rng(derive_seed(manifest.base_seed, "analyze", "bootstrap", 0))
    summary = bootstrap_average_rank(perf, iterations, rng)
    rank_rows = [
        (p, t + 1, fmt(summary.mean[j, t]), fmt(summary.ci_lo[j, t]), fmt(summary.ci_hi[j, t]))
        for j, p in enumerate(summary.policies) for t in range(summary.mean.shape[1])
    ]
    final = {task: {p: float(c[:, -1].mean()) for p, c in curves.items()}
             for task, curves in perf.items()}
    wtl_rows = []
    for p in policy_ids:
        rec = wins_ties_losses([final[t][p] for t in final], [final[t][reference] for t in final])
        wtl_rows.append((p, reference, rec.wins, rec.ties, rec.losses,
                         fmt(sign_test(rec.wins, rec.losses))))

    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "ranks.csv", csv_text(("policy", "t", "mean_rank", "ci_lo", "ci_hi"),
                                           rank_rows))
    write_text(out / "wtl.csv", csv_text(
        ("policy", "reference", "wins", "ties", "losses", "p_value"), wtl_rows))
    write_text(out / "regret.csv", csv_text(("task", "policy", "t", "proxy_regret"), regret_rows))
    write_text(out / "pulls.csv", csv_text(("task", "policy", "arm", "mean_pulls"), pull_rows))
    return AnalyzeReport(rank_rows, wtl_rows, regret_rows, pull_rows)


# --- shape ------------------------------------------------------------------

SHAPE_HEADER = ("task", "arm", "n_samples", "b_hat", "L", "U", "delta_i", "alpha_corollary")


def _shape_rows(task_id: str, samples: list[np.ndarray], gap_mats: list[np.ndarray]):
    gaps = estimate_gaps(gap_mats)
    consts = []
    for x in samples:
        try:
            consts.append(estimate_shape_constants(x))
        except (DegenerateSupportError, InsufficientDataError) as exc:
            log.info("%s: skipping arm (%s)", task_id, exc)
            consts.append(None)
    alpha = ""
    best = consts[gaps.best_arm]
    others = [d for i, d in enumerate(gaps.gaps) if i != gaps.best_arm and d > 0]
    if best is not None and best.L > 0 and others and gaps.horizon >= 16:
        alpha = fmt(tuned_alpha(best.L, min(others), gaps.horizon))
    rows = []
    for i, (x, sc) in enumerate(zip(samples, consts)):
        b_hat = fmt(np.max(x)) if len(x) else ""
        lu = ("", "") if sc is None else (fmt(sc.L), fmt(sc.U))
        rows.append((task_id, i, len(x), b_hat, *lu, fmt(gaps.gaps[i]), alpha))
    return rows


def shape_report(source: Path | str, out: Path | str, samples: int = 100_000,
                 seed: int | None = None, reward_transform: str = "negate") -> list[tuple]:
    """Per-arm shape constants, gaps and the tuned alpha for a trace file or config."""
    source, out = Path(source), Path(out)
    if not source.is_file():
        raise ConfigError(f"input not found: {source}")
    rows = []
    if source.suffix == ".csv":
        table = load_trace_table(source)
        task = trace_task(table, reward_transform)
        rows += _trace_shape(task)
    else:
        from .config import load_config

        exp = load_config(source, seed)
        for task in exp.tasks:
            if all(a.kind == "trace" for a in task.arms):
                rows += _trace_shape(task)
            else:
                rows += _synthetic_shape(task, exp.seed, samples, exp.repetitions, exp.horizon)
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "shape.csv", csv_text(SHAPE_HEADER, rows))
    return rows


def _trace_shape(task: TaskSpec):
    n_reps = task.arms[0].trace.n_repetitions
    seqs = [[trace_rewards(arm, r) for r in range(n_reps)] for arm in task.arms]
    horizon = min(len(s) for arm in seqs for s in arm)
    samples = [np.concatenate(arm) for arm in seqs]
    mats = [np.vstack([s[:horizon] for s in arm]) for arm in seqs]
    return _shape_rows(task.task_id, samples, mats)


def _synthetic_shape(task: TaskSpec, seed: int, n_samples: int, reps: int, horizon: int):
    samples, mats = [], []
    for i, arm in enumerate(task.arms):
        rng = make_rng(derive_seed(seed, task.task_id, "shape", i))
        if arm.kind == "trace":
            raise ConfigError("mixed trace/synthetic tasks are not supported by shape")
        samples.append(np.asarray(draw(arm, rng, n_samples)))
        mats.append(np.asarray(draw(arm, rng, reps * horizon)).reshape(reps, horizon))
    return _shape_rows(task.task_id, samples, mats)


# --- synthetic benchmark ----------------------------------------------------

BENCH_HORIZONS = (50, 100, 200, 500, 1000, 2000)


@dataclass(frozen=True)
class SyntheticExperiment:
    number: int
    task: TaskSpec
    optimal_arm: int


def _exp(number, arms, optimal):
    return SyntheticExperiment(number, TaskSpec(f"synthetic_exp{number}", tuple(arms)), optimal)


def synthetic_experiment(number: int) -> SyntheticExperiment:
    """Built-in extreme-bandit toy tasks; ``optimal_arm`` dominates at every horizon."""
    if number == 1:
        tails = [2.1, 2.3, 1.3, 1.1, 1.9]
        return _exp(1, [parametric_arm("pareto", tail=x) for x in tails], int(np.argmin(tails)))
    if number == 2:
        rates = [2.1, 2.4, 1.9, 1.3, 1.1, 2.9, 1.5, 2.2, 2.6, 1.4]
        return _exp(2, [parametric_arm("exponential", rate=x) for x in rates],
                    int(np.argmin(rates)))
    if number == 3:
        sigmas = [1.64, 2.29, 1.79, 2.67, 1.70, 1.36, 1.90, 2.19, 0.80, 0.12,
                  1.65, 1.19, 1.88, 0.89, 3.35, 1.5, 2.22, 3.03, 1.08, 0.48]
        return _exp(3, [parametric_arm("gaussian", mu=1.0, sigma=s) for s in sigmas],
                    int(np.argmax(sigmas)))
    if number == 4:
        scales = [3, 4, 5, 5, 4]
        shapes = [1.01, 1.01, 1.01, 1.1, 1]
        arms = [parametric_arm("power", shape=a, scale=c) for c, a in zip(scales, shapes)]
        # CDF (x/c)^a: among the widest supports the larger shape puts more mass near c
        return _exp(4, arms, 3)
    raise ConfigError(f"unknown synthetic experiment {number}; expected 1-4")


BENCH_POLICIES = (
    PolicyConfig("maxucb", alpha=0.5),
    PolicyConfig("ucb", alpha=0.5),
    PolicyConfig("random"),
)


@dataclass
class BenchResult:
    experiment: SyntheticExperiment
    horizon: int
    horizons: tuple[int, ...]
    arms: dict[str, np.ndarray]      # policy -> [reps x T]
    rewards: dict[str, np.ndarray]
    oracle: list[np.ndarray]         # per arm [reps x T] running max

    def proxy_regret(self, policy: str) -> np.ndarray:
        return proxy_regret_curve(max_so_far(self.rewards[policy]), self.oracle)

    def optimal_pulls(self, policy: str) -> np.ndarray:
        """Mean cumulative pulls of the optimal arm, per round."""
        hits = self.arms[policy] == self.experiment.optimal_arm
        return np.cumsum(hits, axis=1).mean(axis=0)

    def rows(self) -> list[tuple]:
        out = []
        for p in self.arms:
            reg, opt = self.proxy_regret(p), self.optimal_pulls(p)
            out += [(self.experiment.task.task_id, p, h, fmt(reg[h - 1]), fmt(opt[h - 1]))
                    for h in self.horizons]
        return out


def _bench_job(args):
    task, policy, horizon, seed, reps = args
    traces = [play_cell(task, policy, horizon, seed, r) for r in reps]
    return [t.arms for t in traces], [t.rewards for t in traces]


def run_bench(number: int, horizon: int = 2000, repetitions: int = 1000, seed: int = 0,
              parallel: int = 1, policies=BENCH_POLICIES) -> BenchResult:
    exp = synthetic_experiment(number)
    task = exp.task
    if horizon < task.n_arms:
        raise ConfigError(f"horizon must be at least K={task.n_arms}")
    blocks = [list(range(i, min(i + 50, repetitions))) for i in range(0, repetitions, 50)]
    jobs = [(task, p, horizon, seed, b) for p in policies for b in blocks]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outs = list(pool.map(_bench_job, jobs))
    else:
        outs = [_bench_job(j) for j in jobs]
    arms, rewards = {}, {}
    for j, p in enumerate(policies):
        chunk = outs[j * len(blocks):(j + 1) * len(blocks)]
        arms[p.policy_id] = np.array([row for a, _ in chunk for row in a], dtype=np.int64)
        rewards[p.policy_id] = np.array([row for _, r in chunk for row in r], dtype=float)
    oracle = oracle_curves(task, seed, range(repetitions), horizon)
    horizons = tuple(h for h in BENCH_HORIZONS if h < horizon) + (horizon,)
    return BenchResult(exp, horizon, horizons, arms, rewards, oracle)


BENCH_HEADER = ("task", "policy", "t", "proxy_regret", "mean_optimal_pulls")


def write_bench(result: BenchResult, out: Path | str, traces: bool = False) -> None:
    out = Path(out)
    task_id = result.experiment.task.task_id
    write_text(out / f"{task_id}.bench.csv", csv_text(BENCH_HEADER, result.rows()))
    if traces:
        rows = []
        for p in result.arms:
            for r, (arms, rewards) in enumerate(zip(result.arms[p], result.rewards[p])):
                rows += [(p, r, t, a, fmt(x)) for t, (a, x) in
                         enumerate(zip(arms.tolist(), rewards.tolist()), start=1)]
        write_text(results_path(out, task_id),
                   csv_text(("policy", "repetition", "t", "arm", "reward"), rows))
