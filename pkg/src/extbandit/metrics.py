"""Evaluation statistics: running maxima, proxy regret, ranks, win/tie/loss, sign test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import RunTrace

TIE_TOLERANCE = 1e-8


def max_so_far(trace_or_rewards) -> np.ndarray:
    rewards = trace_or_rewards.rewards if isinstance(trace_or_rewards, RunTrace) \
        else np.asarray(trace_or_rewards, dtype=float)
    return np.maximum.accumulate(rewards, axis=-1)


def _as_curves(curves) -> np.ndarray:
    arr = np.asarray(curves, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def proxy_regret_curve(policy_curves, oracle_curves: Sequence) -> np.ndarray:
    """Best single-arm mean running max minus the policy's mean running max, per round.

    ``policy_curves`` is ``[reps x T]``; ``oracle_curves`` holds one
    ``[reps x T]`` matrix per arm from single-arm episodes.
    """
    pol = _as_curves(policy_curves)
    oracles = [_as_curves(o) for o in oracle_curves]
    if any(o.shape[1] != pol.shape[1] for o in oracles):
        raise ValueError("oracle and policy curves have different horizons")
    best = np.max([o.mean(axis=0) for o in oracles], axis=0)
    return best - pol.mean(axis=0)


def proxy_regret(policy_curves, oracle_curves: Sequence, horizon: int | None = None) -> float:
    pol = _as_curves(policy_curves)
    if horizon is not None and horizon != pol.shape[1]:
        raise ValueError(f"curves have length {pol.shape[1]}, expected T={horizon}")
    return float(proxy_regret_curve(pol, oracle_curves)[-1])


def optimal_pull_count(trace_or_arms, best_arm: int) -> int:
    arms = trace_or_arms.arms if isinstance(trace_or_arms, RunTrace) else trace_or_arms
    return int(np.count_nonzero(np.asarray(arms) == best_arm))


def normalized_loss(results: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Min-max normalise one task's losses over all policies, repetitions and rounds."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in results.items()}
    lo = min(a.min() for a in arrays.values())
    hi = max(a.max() for a in arrays.values())
    if hi == lo:
        return {k: np.zeros_like(a) for k, a in arrays.items()}
    return {k: (a - lo) / (hi - lo) for k, a in arrays.items()}


@dataclass(frozen=True)
class RankSummary:
    policies: tuple[str, ...]
    mean: np.ndarray      # [A x T]
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    samples: np.ndarray   # [iterations x A x T], task-averaged


def bootstrap_average_rank(performance: Mapping[str, Mapping[str, np.ndarray]],
                           iterations: int = 1000, rng: np.random.Generator | None = None,
                           ci: tuple[float, float] = (2.5, 97.5)) -> RankSummary:
    """Task-averaged bootstrap ranks (1 = best, higher performance is better).

    ``performance[task][policy]`` is a ``[reps x T]`` matrix.  In every
    iteration each task's repetitions are resampled with replacement, the
    resampled means are ranked with ties averaged, and ranks are averaged over
    tasks.  Repetition weights are shared by all policies of a task.
    """
    if rng is None:
        rng = np.random.default_rng()
    tasks = list(performance)
    if not tasks:
        raise ValueError("no tasks")
    policies = tuple(performance[tasks[0]])
    if any(tuple(performance[t]) != policies for t in tasks):
        raise ValueError("every task must report the same policies")
    horizon = {np.asarray(performance[t][p]).shape[-1] for t in tasks for p in policies}
    if len(horizon) != 1:
        raise ValueError("all curves must share one horizon")
    n_t = horizon.pop()
    total = np.zeros((iterations, len(policies), n_t))
    for task in tasks:
        mats = [np.atleast_2d(np.asarray(performance[task][p], dtype=float)) for p in policies]
        n_reps = max(m.shape[0] for m in mats)
        u = rng.random((iterations, n_reps))
        means = np.empty((iterations, len(policies), n_t))
        for j, m in enumerate(mats):
            n = m.shape[0]
            idx = np.minimum((u[:, :n] * n).astype(np.int64), n - 1)
            weights = np.zeros((iterations, n))
            np.add.at(weights, (np.arange(iterations)[:, None], idx), 1.0 / n)
            means[:, j, :] = weights @ m
        total += rankdata(-means, method="average", axis=1)
    avg = total / len(tasks)
    return RankSummary(policies, avg.mean(axis=0), np.percentile(avg, ci[0], axis=0),
                       np.percentile(avg, ci[1], axis=0), avg)


@dataclass(frozen=True)
class WtlRecord:
    wins: int
    ties: int
    losses: int
    tolerance: float = TIE_TOLERANCE

    @property
    def total(self) -> int:
        return self.wins + self.ties + self.losses


def is_tie(a: float, b: float, tolerance: float = TIE_TOLERANCE) -> bool:
    return abs(a - b) <= tolerance * (1.0 + abs(b))


def wins_ties_losses(candidate: Sequence[float], reference: Sequence[float],
                     tolerance: float = TIE_TOLERANCE) -> WtlRecord:
    """Count per-task wins/ties/losses of ``candidate`` against ``reference`` (higher wins)."""
    if len(candidate) != len(reference):
        raise ValueError("candidate and reference cover different task counts")
    w = t = l = 0
    for a, b in zip(candidate, reference):
        if is_tie(a, b, tolerance):
            t += 1
        elif a > b:
            w += 1
        else:
            l += 1
    return WtlRecord(w, t, l, tolerance)


def sign_test(wins: int, losses: int) -> float:
    """One-sided exact sign test: ``P(Binomial(wins + losses, 1/2) >= wins)``."""
    if wins < 0 or losses < 0:
        raise ValueError("wins and losses must be non-negative")
    n = wins + losses
    if n == 0:
        return 1.0
    # C(n, k) built incrementally from k = n downwards; exact integers throughout
    term, tail = 1, 0
    for k in range(n, wins - 1, -1):
        tail += term
        term = term * k // (n - k + 1)
    return tail / (1 << n)
