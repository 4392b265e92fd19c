"""Experiment configuration schema.

Configs are YAML (or JSON) documents::

    seed: 7
    horizon: 200
    repetitions: 32
    tasks:
      - id: toy
        arms:
          - {kind: truncated_uniform, low: 0.5, high: 1.0}
          - {kind: truncated_uniform, low: 0.0, high: 1.0}
      - id: tabrepo_ds1
        trace: traces/tabrepo_ds1.csv
        reward_transform: negate
    policies:
      - {name: maxucb, alpha: 0.5}
      - {name: maxucb, alpha: 0.5, burn_in_c: 5, label: maxucb_burnin}
      - {name: ucb}
      - {name: random}

Unknown keys anywhere are errors.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import ConfigError, PolicyConfig
from .environments import ArmSpec, TaskSpec, load_trace_table
from .policies import validate_policy_config

SEED_ENV_VAR = "EXTBANDIT_SEED"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParetoArm(_Strict):
    kind: Literal["pareto"]
    tail: float = Field(gt=1)


class ExponentialArm(_Strict):
    kind: Literal["exponential"]
    rate: float = Field(gt=0)


class GaussianArm(_Strict):
    kind: Literal["gaussian"]
    mu: float
    sigma: float = Field(ge=0)


class TruncatedGaussianArm(_Strict):
    kind: Literal["truncated_gaussian"]
    mu: float
    sigma: float = Field(gt=0)


class TruncatedUniformArm(_Strict):
    kind: Literal["truncated_uniform"]
    low: float
    high: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.low < self.high:
            raise ValueError("low must be < high")
        return self


class PowerArm(_Strict):
    kind: Literal["power"]
    shape: float = Field(ge=1)
    scale: float = Field(gt=0)


class PolyArm(_Strict):
    kind: Literal["inverse_cdf_poly"]
    p: float = Field(gt=0)
    complement: bool = False


class ConstantArm(_Strict):
    kind: Literal["constant"]
    value: float


class TraceArm(_Strict):
    kind: Literal["trace"]
    file: str
    arm: int = Field(ge=0)
    reward_transform: Literal["negate", "one_minus", "identity"] = "negate"


ArmModel = Annotated[
    Union[ParetoArm, ExponentialArm, GaussianArm, TruncatedGaussianArm, TruncatedUniformArm,
          PowerArm, PolyArm, ConstantArm, TraceArm],
    Field(discriminator="kind"),
]


class TaskModel(_Strict):
    id: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.\-]+$")
    arms: list[ArmModel] | None = None
    trace: str | None = None
    reward_transform: Literal["negate", "one_minus", "identity"] = "negate"

    @model_validator(mode="after")
    def _one_source(self):
        if (self.arms is None) == (self.trace is None):
            raise ValueError("a task needs exactly one of 'arms' or 'trace'")
        if self.arms is not None and len(self.arms) < 2:
            raise ValueError("a task needs at least 2 arms")
        return self


class PolicyModel(_Strict):
    name: str
    alpha: float = Field(default=0.5, ge=0)
    exponent_m: float = Field(default=2.0, ge=1)
    burn_in_c: int = Field(default=0, ge=0)
    label: str | None = Field(default=None, pattern=r"^[A-Za-z0-9_.\-]+$")
    params: dict[str, Any] = Field(default_factory=dict)

    def to_policy_config(self) -> PolicyConfig:
        return PolicyConfig(self.name, self.alpha, self.exponent_m, self.burn_in_c,
                            dict(self.params), self.label)


class ExperimentModel(_Strict):
    seed: int = Field(default=0, ge=0, lt=2**64)
    horizon: int = Field(ge=1)
    repetitions: int = Field(ge=1)
    tasks: list[TaskModel] = Field(min_length=1)
    policies: list[PolicyModel] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique(self):
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")
        pids = [p.label or p.name for p in self.policies]
        if len(set(pids)) != len(pids):
            raise ValueError("duplicate policy ids; set 'label' to disambiguate")
        return self


def config_json_schema() -> dict:
    return ExperimentModel.model_json_schema()


class Experiment:
    """A validated config with trace files loaded and arms resolved."""

    def __init__(self, model: ExperimentModel, base_dir: Path, digest: str):
        self.model = model
        self.base_dir = base_dir
        self.digest = digest
        self.policies = [p.to_policy_config() for p in model.policies]
        for pc in self.policies:
            validate_policy_config(pc)
        self._tables: dict[Path, Any] = {}
        self.tasks = [self._task(t) for t in model.tasks]
        for task in self.tasks:
            if model.horizon < task.n_arms:
                raise ConfigError(f"horizon {model.horizon} < K={task.n_arms} for {task.task_id}")
            for pc in self.policies:
                if model.horizon < task.n_arms * (1 + pc.burn_in_c):
                    raise ConfigError(
                        f"horizon {model.horizon} too small for burn-in C={pc.burn_in_c} "
                        f"on {task.task_id}")

    @property
    def seed(self) -> int:
        return self.model.seed

    @property
    def horizon(self) -> int:
        return self.model.horizon

    @property
    def repetitions(self) -> int:
        return self.model.repetitions

    def _table(self, ref: str, task_id: str | None = None):
        path = (self.base_dir / ref).resolve()
        if path not in self._tables:
            if not path.is_file():
                raise ConfigError(f"trace file not found: {path}")
            self._tables[path] = load_trace_table(path, task_id)
        return self._tables[path]

    def _task(self, t: TaskModel) -> TaskSpec:
        if t.trace is not None:
            table = self._table(t.trace, t.id)
            return TaskSpec(t.id, tuple(
                ArmSpec("trace", trace=table, trace_arm=a, reward_transform=t.reward_transform)
                for a in range(table.n_arms)))
        arms = []
        for a in t.arms:
            if isinstance(a, TraceArm):
                table = self._table(a.file)
                if a.arm >= table.n_arms:
                    raise ConfigError(f"{a.file} has no arm {a.arm}")
                arms.append(ArmSpec("trace", trace=table, trace_arm=a.arm,
                                    reward_transform=a.reward_transform))
            else:
                params = a.model_dump(exclude={"kind"})
                arms.append(ArmSpec(a.kind, params))
        return TaskSpec(t.id, tuple(arms))

    def resolved(self) -> dict:
        """Normalised config with absolute trace paths, for reproduction."""
        data = self.model.model_dump(mode="json", exclude_none=True)
        for task in data["tasks"]:
            if "trace" in task:
                task["trace"] = str((self.base_dir / task["trace"]).resolve())
            for arm in task.get("arms", []):
                if arm["kind"] == "trace":
                    arm["file"] = str((self.base_dir / arm["file"]).resolve())
        return data


def parse_config(data: dict, base_dir: Path | str = ".", seed_override: int | None = None,
                 digest: str | None = None) -> Experiment:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data = dict(data)
    if seed_override is not None:
        data["seed"] = seed_override
    try:
        model = ExperimentModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    if digest is None:
        digest = hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()
    return Experiment(model, Path(base_dir), digest)


def load_config(path: str | Path, seed_override: int | None = None) -> Experiment:
    """Read a config file; ``EXTBANDIT_SEED`` overrides its seed, ``seed_override`` both."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        data = yaml.safe_load(raw.decode("utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if seed_override is None and os.environ.get(SEED_ENV_VAR):
        try:
            seed_override = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from None
    digest = hashlib.sha256(raw + f"|seed={seed_override}".encode()).hexdigest()
    return parse_config(data, path.parent, seed_override, digest)
