"""Reward sources: parametric samplers and replay of recorded loss trajectories.

Every sampler is an inverse-CDF (or rejection) transform of draws from a
``numpy.random.Generator``.  Uniform draws are taken from ``(0, 1]`` so that
``U = 1`` maps to the support endpoint and no transform hits ``log(0)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ConfigError, EnvironmentFailure, TraceExhaustedError, spawn_rngs

ARM_KINDS = (
    "pareto",
    "exponential",
    "gaussian",
    "truncated_gaussian",
    "truncated_uniform",
    "power",
    "inverse_cdf_poly",
    "constant",
    "trace",
)

REWARD_TRANSFORMS = {
    "negate": lambda loss: -loss,
    "one_minus": lambda loss: 1.0 - loss,
    "identity": lambda loss: loss,
}

TRACE_HEADER = ("arm_id", "repetition", "iteration", "loss")

# Draws are generated in fixed-size blocks; the block size is part of the
# stream definition and must not depend on the horizon.
CHUNK = 256


def _uniform(rng: np.random.Generator, size=None):
    return 1.0 - rng.random(size)


# --- inverse CDFs -----------------------------------------------------------


def pareto_from_uniform(u, tail):
    return np.power(u, -1.0 / tail)


def exponential_from_uniform(u, rate):
    return -np.log(u) / rate


def power_from_uniform(u, shape, scale):
    return scale * np.power(u, 1.0 / shape)


def poly_from_uniform(u, p, complement=False):
    x = np.power(u, 1.0 / p)
    return 1.0 - x if complement else x


def uniform_from_uniform(u, low, high):
    return low + (high - low) * u


def _scalar(x, size):
    return float(x) if size is None else x


# --- samplers ---------------------------------------------------------------


def sample_pareto(tail: float, rng: np.random.Generator, size=None):
    """Pareto with scale 1: ``P(X > x) = x**-tail`` on ``[1, inf)``."""
    return _scalar(pareto_from_uniform(_uniform(rng, size), tail), size)


def sample_exponential(rate: float, rng: np.random.Generator, size=None):
    return _scalar(exponential_from_uniform(_uniform(rng, size), rate), size)


def sample_power(shape: float, scale: float, rng: np.random.Generator, size=None):
    """CDF ``(x / scale) ** shape`` on ``[0, scale]``."""
    return _scalar(power_from_uniform(_uniform(rng, size), shape, scale), size)


def sample_inverse_cdf_poly(p: float, rng: np.random.Generator, size=None, complement=False):
    """CDF ``x**p`` on [0, 1]; ``complement`` returns ``1 - X`` instead."""
    return _scalar(poly_from_uniform(_uniform(rng, size), p, complement), size)


def sample_truncated_uniform(low: float, high: float, rng: np.random.Generator, size=None):
    return _scalar(uniform_from_uniform(_uniform(rng, size), low, high), size)


def sample_gaussian(mu: float, sigma: float, rng: np.random.Generator, size=None):
    return _scalar(rng.normal(mu, sigma, size), size)


def sample_constant(value: float, rng: np.random.Generator | None = None, size=None):
    return float(value) if size is None else np.full(size, float(value))


def sample_truncated_gaussian(mu: float, sigma: float, rng: np.random.Generator, size=None,
                              low: float = 0.0, high: float = 1.0):
    """Normal(mu, sigma) conditioned on ``[low, high]`` by rejection."""
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(0)
    batch = max(16, n)
    while out.size < n:
        x = rng.normal(mu, sigma, batch)
        out = np.concatenate([out, x[(x >= low) & (x <= high)]])
    out = out[:n]
    return float(out[0]) if size is None else out.reshape(size)


# --- analytic CDFs (used by the KS checks and by bound evaluation) ----------


def analytic_cdf(kind: str, params: Mapping[str, float]) -> Callable[[np.ndarray], np.ndarray]:
    from scipy import stats

    if kind == "pareto":
        return lambda x: np.where(x < 1, 0.0, 1.0 - np.power(np.maximum(x, 1.0), -params["tail"]))
    if kind == "exponential":
        return lambda x: np.where(x < 0, 0.0, 1.0 - np.exp(-params["rate"] * np.maximum(x, 0)))
    if kind == "power":
        a, c = params["shape"], params["scale"]
        return lambda x: np.power(np.clip(x / c, 0.0, 1.0), a)
    if kind == "inverse_cdf_poly":
        p = params["p"]
        if params.get("complement"):
            return lambda x: 1.0 - np.power(np.clip(1.0 - x, 0.0, 1.0), p)
        return lambda x: np.power(np.clip(x, 0.0, 1.0), p)
    if kind == "truncated_uniform":
        lo, hi = params["low"], params["high"]
        return lambda x: np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    if kind == "gaussian":
        return stats.norm(params["mu"], params["sigma"]).cdf
    if kind == "truncated_gaussian":
        mu, s = params["mu"], params["sigma"]
        return stats.truncnorm((0.0 - mu) / s, (1.0 - mu) / s, loc=mu, scale=s).cdf
    raise ValueError(f"no analytic CDF for kind {kind!r}")


# --- arm specifications -----------------------------------------------------


_REQUIRED = {
    "pareto": ("tail",),
    "exponential": ("rate",),
    "gaussian": ("mu", "sigma"),
    "truncated_gaussian": ("mu", "sigma"),
    "truncated_uniform": ("low", "high"),
    "power": ("shape", "scale"),
    "inverse_cdf_poly": ("p",),
    "constant": ("value",),
    "trace": (),
}


@dataclass(frozen=True)
class ArmSpec:
    """One arm: a parametric reward law or a column of a :class:`TraceTable`."""

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    trace: "TraceTable | None" = None
    trace_arm: int | None = None
    reward_transform: str = "negate"

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        validate_arm(self)

    @property
    def support_max(self) -> float:
        p = self.params
        return {
            "truncated_uniform": lambda: p["high"],
            "truncated_gaussian": lambda: 1.0,
            "power": lambda: p["scale"],
            "inverse_cdf_poly": lambda: 1.0,
            "constant": lambda: p["value"],
        }.get(self.kind, lambda: math.inf)()


def validate_arm(arm: ArmSpec) -> None:
    if arm.kind not in _REQUIRED:
        raise ConfigError(f"unknown arm kind {arm.kind!r}")
    missing = [k for k in _REQUIRED[arm.kind] if k not in arm.params]
    if missing:
        raise ConfigError(f"{arm.kind} arm missing parameters {missing}")
    p = arm.params
    checks = {
        "pareto": lambda: p["tail"] > 1,
        "exponential": lambda: p["rate"] > 0,
        "gaussian": lambda: p["sigma"] >= 0,
        "truncated_gaussian": lambda: p["sigma"] > 0,
        "truncated_uniform": lambda: p["low"] < p["high"],
        "power": lambda: p["shape"] >= 1 and p["scale"] > 0,
        "inverse_cdf_poly": lambda: p["p"] > 0,
        "constant": lambda: math.isfinite(p["value"]),
        "trace": lambda: arm.trace is not None and arm.trace_arm is not None
        and 0 <= arm.trace_arm < arm.trace.n_arms,
    }
    if not checks[arm.kind]():
        raise ConfigError(f"{arm.kind} arm parameters out of domain: {dict(p)}")
    if arm.reward_transform not in REWARD_TRANSFORMS:
        raise ConfigError(f"unknown reward_transform {arm.reward_transform!r}")


def draw(arm: ArmSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` rewards from a parametric arm."""
    p = arm.params
    if arm.kind == "pareto":
        return sample_pareto(p["tail"], rng, size)
    if arm.kind == "exponential":
        return sample_exponential(p["rate"], rng, size)
    if arm.kind == "gaussian":
        return sample_gaussian(p["mu"], p["sigma"], rng, size)
    if arm.kind == "truncated_gaussian":
        return sample_truncated_gaussian(p["mu"], p["sigma"], rng, size)
    if arm.kind == "truncated_uniform":
        return sample_truncated_uniform(p["low"], p["high"], rng, size)
    if arm.kind == "power":
        return sample_power(p["shape"], p["scale"], rng, size)
    if arm.kind == "inverse_cdf_poly":
        return sample_inverse_cdf_poly(p["p"], rng, size, bool(p.get("complement", False)))
    if arm.kind == "constant":
        return sample_constant(p["value"], size=size)
    raise ValueError(f"arm kind {arm.kind!r} is not parametric")


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    arms: tuple[ArmSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if len(self.arms) < 2:
            raise ConfigError(f"task {self.task_id!r} needs at least 2 arms")

    @property
    def n_arms(self) -> int:
        return len(self.arms)


# --- trace tables -----------------------------------------------------------


class TraceFormatError(EnvironmentFailure, ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class MissingColumnsError(TraceFormatError):
    pass


class MalformedRowError(TraceFormatError):
    pass


class NonFiniteRewardError(TraceFormatError):
    pass


class DuplicateKeyError(TraceFormatError):
    pass


class IterationGapError(TraceFormatError):
    pass


@dataclass(frozen=True)
class TraceTable:
    """Immutable per-(arm, repetition) loss sequences of one task."""

    task_id: str
    losses: Mapping[tuple[int, int], np.ndarray]
    n_arms: int
    n_repetitions: int

    @property
    def max_length(self) -> int:
        return max(len(v) for v in self.losses.values())

    def sequence(self, arm: int, repetition: int) -> np.ndarray:
        return self.losses[(arm, repetition)]

    def arm_losses(self, arm: int) -> list[np.ndarray]:
        return [self.losses[(arm, r)] for r in range(self.n_repetitions)]


def load_trace_table(path: str | Path, task_id: str | None = None) -> TraceTable:
    path = Path(path)
    task_id = task_id or path.stem
    rows: dict[tuple[int, int], dict[int, tuple[float, int]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MissingColumnsError(path, 1, "empty file")
        header = tuple(h.strip() for h in header)
        missing = [c for c in TRACE_HEADER if c not in header]
        if missing:
            raise MissingColumnsError(path, 1, f"missing columns {missing}")
        if header != TRACE_HEADER:
            raise MalformedRowError(path, 1, f"header must be {','.join(TRACE_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRowError(path, line, f"expected 4 fields, got {len(row)}")
            try:
                arm, rep, it = (int(v) for v in row[:3])
                loss = float(row[3])
            except ValueError as exc:
                raise MalformedRowError(path, line, str(exc)) from None
            if arm < 0 or rep < 0 or it < 1:
                raise MalformedRowError(path, line, "negative arm/repetition or iteration < 1")
            if not math.isfinite(loss):
                raise NonFiniteRewardError(path, line, f"non-finite loss {row[3]!r}")
            seq = rows.setdefault((arm, rep), {})
            if it in seq:
                raise DuplicateKeyError(
                    path, line, f"duplicate key (arm={arm}, rep={rep}, iter={it}), "
                    f"first seen on line {seq[it][1]}")
            seq[it] = (loss, line)
    if not rows:
        raise MalformedRowError(path, 2, "no data rows")

    n_arms = max(a for a, _ in rows) + 1
    n_reps = max(r for _, r in rows) + 1
    for a in range(n_arms):
        for r in range(n_reps):
            if (a, r) not in rows:
                raise MalformedRowError(path, 0, f"no rows for arm={a} repetition={r}")
    losses = {}
    for key in sorted(rows):
        seq = rows[key]
        for expected, it in enumerate(sorted(seq), start=1):
            if it != expected:
                raise IterationGapError(
                    path, seq[it][1], f"iteration {it} follows {expected - 1} for "
                    f"(arm={key[0]}, rep={key[1]})")
        arr = np.array([seq[i][0] for i in sorted(seq)], dtype=float)
        arr.setflags(write=False)
        losses[key] = arr
    return TraceTable(task_id, losses, n_arms, n_reps)


def trace_task(table: TraceTable, reward_transform: str = "negate") -> TaskSpec:
    arms = [ArmSpec("trace", trace=table, trace_arm=a, reward_transform=reward_transform)
            for a in range(table.n_arms)]
    return TaskSpec(table.task_id, tuple(arms))


def trace_rewards(arm: ArmSpec, repetition: int) -> np.ndarray:
    if repetition >= arm.trace.n_repetitions:
        raise EnvironmentFailure(
            f"task {arm.trace.task_id!r} has {arm.trace.n_repetitions} repetitions; "
            f"repetition {repetition} requested")
    losses = arm.trace.sequence(arm.trace_arm, repetition)
    return np.asarray(REWARD_TRANSFORMS[arm.reward_transform](losses), dtype=float)


# --- arm streams and environments ------------------------------------------


class SampledStream:
    """Reward stream of one parametric arm; the n-th pull returns the n-th draw."""

    def __init__(self, arm: ArmSpec, rng: np.random.Generator):
        self.arm = arm
        self.rng = rng
        self._buf: list[float] = []
        self.cursor = 0

    def next(self) -> float:
        if self.cursor == len(self._buf):
            self._buf.extend(draw(self.arm, self.rng, CHUNK).tolist())
        value = self._buf[self.cursor]
        self.cursor += 1
        return value


class ReplayStream:
    def __init__(self, rewards: np.ndarray, task_id: str, arm: int, repetition: int):
        self._rewards = rewards.tolist()
        self.task_id = task_id
        self.arm = arm
        self.repetition = repetition
        self.cursor = 0

    def next(self) -> float:
        if self.cursor >= len(self._rewards):
            raise TraceExhaustedError(self.task_id, self.arm, self.cursor, self.repetition)
        value = self._rewards[self.cursor]
        self.cursor += 1
        return value


class BanditEnvironment:
    """K independent per-arm reward streams for one episode.

    Each arm owns a child generator spawned from the episode seed, so an
    arm's reward sequence does not depend on which other arms are pulled.
    """

    def __init__(self, task: TaskSpec, seed: int, repetition: int = 0):
        self.task_id = task.task_id
        self.n_arms = task.n_arms
        rngs = spawn_rngs(seed, task.n_arms)
        self.streams = []
        for i, (arm, rng) in enumerate(zip(task.arms, rngs)):
            if arm.kind == "trace":
                self.streams.append(
                    ReplayStream(trace_rewards(arm, repetition), task.task_id, i, repetition))
            else:
                self.streams.append(SampledStream(arm, rng))

    def pull(self, arm: int) -> float:
        return self.streams[arm].next()


def make_environment(task: TaskSpec, seed: int, repetition: int = 0) -> BanditEnvironment:
    return BanditEnvironment(task, seed, repetition)


def arm_stream_head(task: TaskSpec, arm: int, seed: int, n: int, repetition: int = 0,
                    pad: bool = False) -> np.ndarray:
    """First ``n`` rewards arm ``arm`` would emit under ``seed``.

    Equivalent to a single-arm episode of length ``n``.  With ``pad`` a
    shorter trace is extended by repeating its last reward instead of raising.
    """
    spec = task.arms[arm]
    if spec.kind == "trace":
        rewards = trace_rewards(spec, repetition)
        if len(rewards) < n:
            if not pad:
                raise TraceExhaustedError(task.task_id, arm, len(rewards), repetition)
            rewards = np.concatenate([rewards, np.full(n - len(rewards), rewards[-1])])
        return rewards[:n].copy()
    rng = spawn_rngs(seed, task.n_arms)[arm]
    chunks = -(-n // CHUNK)
    return np.concatenate([draw(spec, rng, CHUNK) for _ in range(chunks)])[:n]


def parametric_arm(kind: str, **params) -> ArmSpec:
    return ArmSpec(kind, params)


def sample_matrix(arm: ArmSpec, rng: np.random.Generator, repetitions: int, horizon: int
                  ) -> np.ndarray:
    return np.asarray(draw(arm, rng, repetitions * horizon)).reshape(repetitions, horizon)


def stack_rewards(sequences: Sequence[np.ndarray]) -> np.ndarray:
    lengths = {len(s) for s in sequences}
    if len(lengths) != 1:
        raise ValueError(f"ragged sequences with lengths {sorted(lengths)}")
    return np.vstack(sequences)
