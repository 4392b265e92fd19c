"""Survival-function shape constants, suboptimality gaps and regret bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ExtBanditError

MIN_SHAPE_SAMPLES = 100
DEGENERATE_STD = 1e-3


class InsufficientDataError(ExtBanditError, ValueError):
    pass


class DegenerateSupportError(ExtBanditError, ValueError):
    pass


class RaggedInputError(ExtBanditError, ValueError):
    pass


@dataclass(frozen=True)
class SurvivalEstimate:
    """Empirical survival function ``G(x) = #{samples > x} / n``."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def __call__(self, x):
        above = self.n - np.searchsorted(self.values, x, side="right")
        out = above / self.n
        return float(out) if np.ndim(out) == 0 else out

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])


def empirical_survival(samples) -> SurvivalEstimate:
    values = np.sort(np.asarray(samples, dtype=float).ravel())
    if values.size < 2:
        raise InsufficientDataError("empirical survival needs at least 2 samples")
    if not np.all(np.isfinite(values)):
        raise ValueError("samples must be finite")
    values.setflags(write=False)
    return SurvivalEstimate(values)


def survival_inverse(estimate: SurvivalEstimate, q: float) -> float:
    """Smallest sample ``x`` with ``G(x) <= q``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    v = estimate.values
    above = estimate.n - np.searchsorted(v, v, side="right")
    # relative slack absorbs q*n landing a rounding error below an integer
    ok = above <= q * estimate.n * (1 + 1e-12)
    return float(v[int(np.argmax(ok))])


@dataclass(frozen=True)
class ShapeConstants:
    L: float
    U: float
    b_hat: float
    eps_grid: np.ndarray
    ratios: np.ndarray
    n_samples: int = 0


def probe_shape_constants(survival: Callable, b: float, eps_grid) -> ShapeConstants:
    """Evaluate ``G(b - eps) / eps`` on a grid; L and U are its min and max."""
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size == 0 or np.any(eps <= 0):
        raise ValueError("probe offsets must be positive and non-empty")
    ratios = np.asarray(survival(b - eps), dtype=float) / eps
    return ShapeConstants(float(ratios.min()), float(ratios.max()), float(b), eps, ratios)


def estimate_shape_constants(samples, grid_size: int = 100, q_low: float = 0.01,
                             q_high: float = 0.99) -> ShapeConstants:
    """Empirical L and U of one arm's rewards.

    Offsets run linearly over ``[b - Q(q_low), b - Q(q_high)]`` where ``b`` is
    the sample maximum and ``Q`` the empirical survival inverse, so the probe
    stays between the 1% and 99% survival levels.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_SHAPE_SAMPLES:
        raise InsufficientDataError(
            f"need at least {MIN_SHAPE_SAMPLES} samples, got {x.size}")
    if np.std(x) < DEGENERATE_STD:
        raise DegenerateSupportError(f"sample std {np.std(x):.3g} < {DEGENERATE_STD}")
    est = empirical_survival(x)
    b = est.max
    lo = b - survival_inverse(est, q_low)
    hi = b - survival_inverse(est, q_high)
    eps = np.linspace(lo, hi, grid_size)
    eps = eps[eps > 0]
    if eps.size == 0:
        raise DegenerateSupportError("empty probe range")
    sc = probe_shape_constants(est, b, eps)
    return ShapeConstants(sc.L, sc.U, sc.b_hat, sc.eps_grid, sc.ratios, est.n)


@dataclass(frozen=True)
class GapEstimate:
    expected_max: np.ndarray
    best_arm: int
    gaps: np.ndarray
    horizon: int


def estimate_gaps(reward_matrices: Sequence, horizon: int | None = None) -> GapEstimate:
    """Monte-Carlo suboptimality gaps from per-arm ``[repetitions x T]`` rewards.

    ``v_i`` is the mean over repetitions of the running maximum at ``T``.
    """
    mats = []
    for i, m in enumerate(reward_matrices):
        try:
            arr = np.asarray(m, dtype=float)
        except ValueError:
            raise RaggedInputError(f"arm {i}: ragged repetitions") from None
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RaggedInputError(f"arm {i}: expected a non-empty 2-D matrix")
        mats.append(arr)
    if not mats:
        raise RaggedInputError("no arms")
    if horizon is None:
        widths = {m.shape[1] for m in mats}
        if len(widths) != 1:
            raise RaggedInputError(f"arms have different lengths {sorted(widths)}")
        horizon = widths.pop()
    short = [i for i, m in enumerate(mats) if m.shape[1] < horizon]
    if short:
        raise RaggedInputError(f"arms {short} shorter than T={horizon}")
    v = np.array([m[:, :horizon].max(axis=1).mean() for m in mats])
    best = int(np.argmax(v))
    return GapEstimate(v, best, v[best] - v, horizon)


def suboptimal_pull_bound(l_star: float, u_i: float, delta_i: float, alpha: float,
                          horizon: int) -> float:
    """Upper bound on the expected pulls of a suboptimal arm under MaxUCB.

    ``T^(1-e) / (1-e) + 2 alpha sqrt(U_i T) ln T`` with
    ``e = 2 L* alpha sqrt(Delta_i)``.  For ``e >= 1`` the closed form is
    invalid and the first term becomes ``sum_{t<=T} t^-e``.
    """
    if min(l_star, u_i, delta_i, alpha) < 0 or horizon < 1:
        raise ValueError("inputs must be non-negative and T >= 1")
    e = 2.0 * l_star * alpha * math.sqrt(delta_i)
    if 1.0 - e > 0:
        first = horizon ** (1.0 - e) / (1.0 - e)
    else:
        first = float(np.sum(np.arange(1, horizon + 1, dtype=float) ** -e))
    return first + 2.0 * alpha * math.sqrt(u_i * horizon) * math.log(horizon)


def pull_count_regret_bound(pull_counts, supports, horizon: int, best_arm: int) -> float:
    """Regret bound ``max_i b_i / T * sum_{i != i*} N_i`` from pull counts."""
    n = np.asarray(pull_counts, dtype=float)
    if not math.isclose(n.sum(), horizon, rel_tol=1e-9):
        raise ValueError(f"pull counts sum to {n.sum()}, expected {horizon}")
    suboptimal = n.sum() - n[best_arm]
    return float(np.max(supports)) / horizon * suboptimal


def tuned_alpha(l_star: float, delta_min: float, horizon: float) -> float:
    """Exploration weight ``(1 - 2 ln ln T / ln T) / (4 L* sqrt(Delta_min))``."""
    if l_star <= 0 or delta_min <= 0:
        raise ValueError("L* and the minimum gap must be positive")
    if horizon < 16:
        raise ValueError("T must be at least 16")
    log_t = math.log(horizon)
    return (1.0 - 2.0 * math.log(log_t) / log_t) / (4.0 * l_star * math.sqrt(delta_min))


@dataclass(frozen=True)
class MaxTailCheck:
    p_max_le: float
    bound_le: float
    p_max_gt: float
    bound_gt: float
    stderr: float
    passed_le: bool
    passed_gt: bool

    @property
    def passed(self) -> bool:
        return self.passed_le and self.passed_gt


def max_tail_check(maxima, survival_at_x: float, n: int, x: float) -> MaxTailCheck:
    """Compare Monte-Carlo tail probabilities of a sample maximum with their bounds.

    ``maxima`` holds independent maxima of ``n`` draws each.  Checks
    ``P(max <= x) <= exp(-n G(x))`` and ``P(max > x) <= n G(x)``, each
    allowed three standard errors of slack.
    """
    m = np.asarray(maxima, dtype=float)
    p_le = float(np.mean(m <= x))
    p_gt = 1.0 - p_le
    se = math.sqrt(p_le * (1.0 - p_le) / m.size)
    b_le = math.exp(-n * survival_at_x)
    b_gt = n * survival_at_x
    return MaxTailCheck(p_le, b_le, p_gt, b_gt, se, p_le <= b_le + 3 * se, p_gt <= b_gt + 3 * se)
