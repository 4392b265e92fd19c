from __future__ import annotations

import numpy as np

from .core import ConfigError, PolicyConfig, RunTrace, derive_seed, make_rng
from .environments import TaskSpec, make_environment
from .policies import make_policy


def play(env, policy, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=float)
    for t in range(1, horizon + 1):
        arm = policy.select(t)
        reward = env.pull(arm)
        policy.update(arm, reward)
        arms[t - 1] = arm
        rewards[t - 1] = reward
    return arms, rewards


def run_episode(task: TaskSpec, policy_config: PolicyConfig, horizon: int, seed: int,
                repetition: int = 0, policy_seed: int | None = None) -> RunTrace:
    """Play one episode and return its trace.

    ``seed`` drives the reward streams; ``policy_seed`` (derived from ``seed``
    when omitted) drives any randomness inside the policy.  The result is a
    pure function of the arguments.
    """
    k = task.n_arms
    if horizon < k * (1 + policy_config.burn_in_c):
        raise ConfigError(
            f"horizon {horizon} too small for K={k} with burn-in C={policy_config.burn_in_c}")
    if policy_seed is None:
        policy_seed = derive_seed(seed, task.task_id, policy_config.policy_id, repetition)
    policy = make_policy(policy_config, k, make_rng(policy_seed))
    env = make_environment(task, seed, repetition)
    arms, rewards = play(env, policy, horizon)
    return RunTrace(task.task_id, policy_config.policy_id, repetition, horizon, arms, rewards, k)
