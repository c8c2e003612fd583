"""Run configuration: YAML file <-> nested dataclasses, strictly validated."""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ._validation import ContractError
from .envelope import RewardWeights, SafetyWindowSpec
from .grid_env import FaultScenario, GridEnv, SurrogateParams, default_task_set
from .toy_env import ToyEnv, ToyParams, ToyScenario
from .trainer import TrainerConfig

ENVIRONMENTS = ("grid", "toy")

# keys that never influence the numbers a run produces
_UNHASHED = {("output",), ("parallelism",), ("trainer", "n_iter")}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = ""
    checkpoint_every: int = 10
    dump_trajectories: bool = False


@dataclass(frozen=True)
class RunConfig:
    env: str = "grid"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    safety: SafetyWindowSpec = field(default_factory=SafetyWindowSpec)
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    tasks: tuple[FaultScenario, ...] = field(default_factory=default_task_set)
    toy: ToyParams = field(default_factory=ToyParams)
    toy_scenario: ToyScenario = field(default_factory=ToyScenario)
    output: OutputConfig = field(default_factory=OutputConfig)
    parallelism: int = 1

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env: must be one of {ENVIRONMENTS}, got {self.env!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism: must be >= 1")
        if self.env == "grid":
            if not self.tasks:
                raise ConfigError("tasks: must be non-empty")
            for k, sc in enumerate(self.tasks):
                if sc.fault_bus not in self.surrogate.prox:
                    raise ConfigError(f"tasks[{k}].fault_bus: bus {sc.fault_bus} not in surrogate.prox")

    def env_factory(self):
        if self.env == "toy":
            return functools.partial(ToyEnv, self.toy)
        return functools.partial(GridEnv, self.surrogate, self.reward, self.safety)

    def task_list(self) -> list:
        if self.env == "toy":
            return [self.toy_scenario]
        return list(self.tasks)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_seed(self, seed: int) -> "RunConfig":
        return self.replace(trainer=dataclasses.replace(self.trainer, seed=seed))


def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: to_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def _default_of(f: dataclasses.Field):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return dataclasses.MISSING


def _coerce(value, template, path: str):
    """Convert ``value`` to the shape of ``template`` (a default value)."""
    if dataclasses.is_dataclass(template):
        return _build(type(template), value, path)
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(template, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(template, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(template, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(template, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        sample = next(iter(template.values()))
        out = {}
        for k, v in value.items():
            try:
                key = int(k)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: key {k!r} is not a bus number") from None
            out[key] = _coerce(v, sample, f"{path}.{k}")
        return out
    if isinstance(template, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        if not template:
            return tuple(value)
        sample = template[0]
        return tuple(_coerce(v, sample, f"{path}[{i}]") for i, v in enumerate(value))
    return value


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown key")
    kwargs = {}
    for name, f in fields.items():
        if name not in data:
            continue
        template = _default_of(f)
        sub = f"{path}.{name}" if path else name
        if name == "tasks":
            if not isinstance(data[name], list):
                raise ConfigError(f"{sub}: expected a list")
            kwargs[name] = tuple(
                _build(FaultScenario, v, f"{sub}[{i}]") for i, v in enumerate(data[name])
            )
        else:
            kwargs[name] = _coerce(data[name], template, sub)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ContractError, TypeError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return from_dict(data or {})


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None)


def config_hash(config: RunConfig) -> str:
    """Digest of everything that influences the trajectory of a run."""
    d = to_dict(config)
    for key in _UNHASHED:
        node = d
        for part in key[:-1]:
            node = node[part]
        node.pop(key[-1], None)
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
