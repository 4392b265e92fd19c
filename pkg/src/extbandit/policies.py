"""Index policies for the max K-armed bandit and the baseline registry.

All index policies first pull every arm once in index order, then pick the
arm with the largest index; ties go to the lowest arm index.
"""

from __future__ import annotations

import math
from types import MappingProxyType
from typing import Sequence

import numpy as np

from .core import ConfigError, PolicyConfig


def maxucb_index(max_reward: float, n: int, t: int, alpha: float, m: float = 2.0) -> float:
    """Observed maximum plus the bonus ``(alpha * ln t / n) ** m``."""
    return max_reward + (alpha * math.log(t) / n) ** m


def ucb_index(mean: float, n: int, t: int, alpha: float) -> float:
    return mean + math.sqrt(alpha * math.log(t) / n)


def argmax_lowest(values: Sequence[float]) -> int:
    best, best_v = 0, values[0]
    for i in range(1, len(values)):
        if values[i] > best_v:
            best, best_v = i, values[i]
    return best


class IndexPolicy:
    name = "index"

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ConfigError("n_arms must be positive")
        self.n_arms = n_arms
        self.counts = [0] * n_arms

    def _uninitialised(self) -> int | None:
        for i, n in enumerate(self.counts):
            if n == 0:
                return i
        return None

    def select(self, t: int) -> int:
        arm = self._uninitialised()
        if arm is not None:
            return arm
        return self._select_initialised(t)

    def _select_initialised(self, t: int) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self._observe(arm, reward)

    def _observe(self, arm: int, reward: float) -> None:
        raise NotImplementedError


class MaxUCB(IndexPolicy):
    """Max-UCB: running per-arm maximum plus a polynomially decaying bonus."""

    name = "maxucb"

    def __init__(self, n_arms: int, alpha: float = 0.5, exponent_m: float = 2.0):
        super().__init__(n_arms)
        if alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        if exponent_m < 1:
            raise ConfigError(f"exponent_m must be >= 1, got {exponent_m}")
        self.alpha = alpha
        self.exponent_m = exponent_m
        self.maxima = [-math.inf] * n_arms

    def indices(self, t: int) -> list[float]:
        return [maxucb_index(mx, n, t, self.alpha, self.exponent_m)
                for mx, n in zip(self.maxima, self.counts)]

    def _select_initialised(self, t: int) -> int:
        return argmax_lowest(self.indices(t))

    def _observe(self, arm: int, reward: float) -> None:
        if reward > self.maxima[arm]:
            self.maxima[arm] = reward


def maxucb_select(maxima: Sequence[float], counts: Sequence[int], t: int, alpha: float,
                  m: float = 2.0) -> int:
    return argmax_lowest([maxucb_index(mx, n, t, alpha, m) for mx, n in zip(maxima, counts)])


class UCB(IndexPolicy):
    """Classical UCB on the running mean."""

    name = "ucb"

    def __init__(self, n_arms: int, alpha: float = 0.5):
        super().__init__(n_arms)
        if alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {alpha}")
        self.alpha = alpha
        self.means = [0.0] * n_arms

    def indices(self, t: int) -> list[float]:
        return [ucb_index(mu, n, t, self.alpha) for mu, n in zip(self.means, self.counts)]

    def _select_initialised(self, t: int) -> int:
        return argmax_lowest(self.indices(t))

    def _observe(self, arm: int, reward: float) -> None:
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm]


def ucb_select(means: Sequence[float], counts: Sequence[int], t: int, alpha: float) -> int:
    return argmax_lowest([ucb_index(mu, n, t, alpha) for mu, n in zip(means, counts)])


def random_select(rng: np.random.Generator, n_arms: int) -> int:
    return int(rng.integers(n_arms))


class RandomPolicy(IndexPolicy):
    """Uniform arm choice after the one-pull-per-arm initialisation."""

    name = "random"

    def __init__(self, n_arms: int, rng: np.random.Generator):
        super().__init__(n_arms)
        self.rng = rng

    def _select_initialised(self, t: int) -> int:
        return random_select(self.rng, self.n_arms)

    def _observe(self, arm: int, reward: float) -> None:
        pass


class BurnIn:
    """Pull each arm ``burn_in_c`` times round-robin, discarding the rewards.

    The wrapped policy only starts observing after ``burn_in_c * K`` rounds;
    it still receives the global round number, so its bonus uses ``ln t``.
    """

    def __init__(self, inner: IndexPolicy, burn_in_c: int):
        if burn_in_c < 0:
            raise ConfigError(f"burn_in_c must be >= 0, got {burn_in_c}")
        self.inner = inner
        self.burn_in_c = burn_in_c
        self.n_arms = inner.n_arms
        self._pulls = 0

    @property
    def burn_in_rounds(self) -> int:
        return self.burn_in_c * self.n_arms

    @property
    def in_burn_in(self) -> bool:
        return self._pulls < self.burn_in_rounds

    def select(self, t: int) -> int:
        if self.in_burn_in:
            return self._pulls % self.n_arms
        return self.inner.select(t)

    def update(self, arm: int, reward: float) -> None:
        burning = self.in_burn_in
        self._pulls += 1
        if not burning:
            self.inner.update(arm, reward)

    def __getattr__(self, item):
        return getattr(self.inner, item)


def maxucb_burnin_wrap(inner: MaxUCB, burn_in_c: int) -> BurnIn:
    return BurnIn(inner, burn_in_c)


# Hyperparameter defaults of bandit baselines that this package does not
# implement.  "horizon" marks a parameter set to the time horizon T and
# "1/t" one that decays with the iteration counter.
BASELINE_DEFAULTS = MappingProxyType({
    "maxucb": MappingProxyType({"alpha": 0.5}),
    "ucb": MappingProxyType({"alpha": 0.5}),
    "quantile_bayes_ucb": MappingProxyType({"alpha": 1.0, "beta": 0.2, "tau": 0.95}),
    "quantile_ucb": MappingProxyType({"alpha": 0.5, "tau": 0.95}),
    "er_ucb_s": MappingProxyType({"beta": 0.6, "theta": 0.01, "gamma": 20.0}),
    "er_ucb_n": MappingProxyType({"alpha": 1.0, "theta": 0.01, "gamma": 20.0}),
    "rising_bandits": MappingProxyType({"C": 7, "T": "horizon"}),
    "max_median": MappingProxyType({"epsilon": "1/t"}),
    "qomax_sda": MappingProxyType({"q": 0.5, "gamma": 2 / 3}),
    "qomax_etc": MappingProxyType({"q": 0.5, "b_T": 4, "n_T": 3, "T": "horizon"}),
    "threshold_ascent": MappingProxyType({"delta": 0.1, "s": 20, "T": "horizon"}),
    "successive_halving": MappingProxyType({"eta": 2.0, "T": "horizon"}),
    "r_sr": MappingProxyType({"epsilon": 0.25, "T": "horizon"}),
    "r_ucbe": MappingProxyType({"alpha": 57.12, "epsilon": 0.25, "sigma": 0.05, "T": "horizon"}),
    "maxsearch_gaussian": MappingProxyType({"c": 1.0}),
    "maxsearch_subgaussian": MappingProxyType({"c": 0.27}),
    "exp3": MappingProxyType({}),
})

IMPLEMENTED = ("maxucb", "ucb", "random")
EXTERNAL_BASELINES = tuple(k for k in BASELINE_DEFAULTS if k not in IMPLEMENTED)


class ExternalBaselineError(ConfigError, NotImplementedError):
    pass


def validate_policy_config(config: PolicyConfig) -> None:
    if config.name in EXTERNAL_BASELINES:
        raise ExternalBaselineError(
            f"{config.name!r} is not implemented: external baseline; defaults available "
            f"in BaselineDefaults: {dict(BASELINE_DEFAULTS[config.name])}")
    if config.name not in IMPLEMENTED:
        raise ConfigError(f"unknown policy {config.name!r}; known: {', '.join(IMPLEMENTED)}")
    if not config.alpha >= 0:
        raise ConfigError(f"alpha must be >= 0, got {config.alpha}")
    if not config.exponent_m >= 1:
        raise ConfigError(f"exponent_m must be >= 1, got {config.exponent_m}")
    if config.burn_in_c < 0 or int(config.burn_in_c) != config.burn_in_c:
        raise ConfigError(f"burn_in_c must be a non-negative integer, got {config.burn_in_c}")


def make_policy(config: PolicyConfig, n_arms: int, rng: np.random.Generator | None = None):
    validate_policy_config(config)
    if config.name == "maxucb":
        policy = MaxUCB(n_arms, config.alpha, config.exponent_m)
    elif config.name == "ucb":
        policy = UCB(n_arms, config.alpha)
    else:
        if rng is None:
            raise ConfigError("random policy needs a generator")
        policy = RandomPolicy(n_arms, rng)
    if config.burn_in_c:
        return BurnIn(policy, int(config.burn_in_c))
    return policy
