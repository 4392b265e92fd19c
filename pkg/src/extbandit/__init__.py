"""Max K-armed bandit toolkit: MaxUCB, shape constants, regret bounds and evaluation metrics."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConfigError,
    EnvironmentFailure,
    PolicyConfig,
    PullRecord,
    RunTrace,
    TraceExhaustedError,
    derive_seed,
    environment_seed,
)
from .environments import ArmSpec, TaskSpec, load_trace_table, make_environment  # noqa: E402
from .episode import run_episode  # noqa: E402
from .policies import UCB, BurnIn, MaxUCB, RandomPolicy, make_policy, maxucb_index  # noqa: E402

__all__ = [
    "ArmSpec",
    "BurnIn",
    "ConfigError",
    "EnvironmentFailure",
    "MaxUCB",
    "PolicyConfig",
    "PullRecord",
    "RandomPolicy",
    "RunTrace",
    "TaskSpec",
    "TraceExhaustedError",
    "UCB",
    "derive_seed",
    "environment_seed",
    "load_trace_table",
    "make_environment",
    "make_policy",
    "maxucb_index",
    "run_episode",
]
