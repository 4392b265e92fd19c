"""Domain types, seeding and the environment/policy protocols."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class ExtBanditError(Exception):
    """Base class for all package errors."""


class ConfigError(ExtBanditError, ValueError):
    """Invalid experiment or policy configuration."""


class EnvironmentFailure(ExtBanditError):
    """A reward source could not produce a reward."""


class TraceExhaustedError(EnvironmentFailure):
    def __init__(self, task_id: str, arm: int, position: int, repetition: int = 0):
        self.task_id = task_id
        self.arm = arm
        self.position = position
        self.repetition = repetition
        super().__init__(
            f"trace-exhausted: task={task_id!r} arm={arm} repetition={repetition} "
            f"position={position}"
        )


@dataclass(frozen=True)
class PullRecord:
    round: int
    arm: int
    reward: float


@dataclass(frozen=True)
class RunTrace:
    """Pulls of one (task, policy, repetition) episode.

    Stored column-wise; ``records`` materialises :class:`PullRecord` objects.
    """

    task_id: str
    policy_id: str
    repetition: int
    horizon: int
    arms: np.ndarray
    rewards: np.ndarray
    n_arms: int

    def __post_init__(self):
        if len(self.arms) != len(self.rewards):
            raise ValueError("arms and rewards differ in length")

    def __len__(self) -> int:
        return len(self.arms)

    @property
    def records(self) -> list[PullRecord]:
        return [
            PullRecord(t + 1, int(a), float(r))
            for t, (a, r) in enumerate(zip(self.arms, self.rewards))
        ]

    def __iter__(self) -> Iterator[PullRecord]:
        return iter(self.records)

    @property
    def complete(self) -> bool:
        return len(self.arms) == self.horizon

    def pull_counts(self) -> np.ndarray:
        return np.bincount(self.arms, minlength=self.n_arms)

    def same_as(self, other: "RunTrace") -> bool:
        return (
            (self.task_id, self.policy_id, self.repetition, self.horizon)
            == (other.task_id, other.policy_id, other.repetition, other.horizon)
            and np.array_equal(self.arms, other.arms)
            and self.rewards.tobytes() == other.rewards.tobytes()
        )


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    alpha: float = 0.5
    exponent_m: float = 2.0
    burn_in_c: int = 0
    params: dict = field(default_factory=dict)
    label: str | None = None

    @property
    def policy_id(self) -> str:
        return self.label or self.name


class Environment(Protocol):
    task_id: str
    n_arms: int

    def pull(self, arm: int) -> float: ...


class Policy(Protocol):
    n_arms: int

    def select(self, t: int) -> int: ...

    def update(self, arm: int, reward: float) -> None: ...


def environment_pull(env: Environment, arm: int) -> float:
    if not 0 <= arm < env.n_arms:
        raise IndexError(f"arm {arm} outside [0, {env.n_arms})")
    reward = env.pull(arm)
    if not math.isfinite(reward):
        raise EnvironmentFailure(f"non-finite reward {reward!r} from arm {arm}")
    return reward


# --- seeding ---------------------------------------------------------------


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(base_seed: int, task_id: str, policy_id: str, repetition: int) -> int:
    """Mix a base seed with cell coordinates into a 64-bit stream seed."""
    if repetition < 0:
        raise ValueError("repetition must be non-negative")
    x = splitmix64(base_seed & _MASK64)
    for part in (_stable_hash(task_id), _stable_hash(policy_id), repetition & _MASK64):
        x = splitmix64(x ^ part)
    return x


# Environment streams are keyed without the policy so that every policy in a
# sweep sees the same reward draws (paired comparisons).
ENV_STREAM = "<environment>"


def environment_seed(base_seed: int, task_id: str, repetition: int) -> int:
    return derive_seed(base_seed, task_id, ENV_STREAM, repetition)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def pull_counts(arms: Sequence[int], n_arms: int) -> np.ndarray:
    return np.bincount(np.asarray(arms, dtype=np.int64), minlength=n_arms)
