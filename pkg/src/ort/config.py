"""Run configuration: YAML file, then ``ORT_*`` environment variables, then CLI flags."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError
from .reasoner import CYCLE_ORDERS

FULL = "full"
NO_LLM_FILTER = "no_llm_filter"
TRACE_FORWARD = "trace_forward"
NO_RULES = "no_rules"
MODES = (FULL, NO_LLM_FILTER, TRACE_FORWARD, NO_RULES)

CONFIG_ENV = "ORT_CONFIG"
_PATH_FIELDS = ("kg", "index", "dataset", "prompts")


@dataclass
class BackendConfig:
    kind: str = "mock"
    fixtures: str | None = None
    url: str = ""
    model: str = ""
    timeout: float = 60.0
    retries: int = 3
    parse_attempts: int = 2
    max_in_flight: int = 4
    backoff: float = 0.5


@dataclass
class RunConfig:
    max_pop: int = 5
    top_k: int = 10
    seed: int = 0
    mode: str = FULL
    strict: bool = False
    cycle_order: str = "construction"
    empty_path_fallback: bool = False
    fallback_on_empty_selection: bool = True
    workers: int = 1
    kg: str | None = None
    index: str | None = None
    dataset: str | None = None
    prompts: str | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)

    def validate(self) -> "RunConfig":
        if self.max_pop < 1:
            raise ConfigError(f"max_pop must be >= 1, got {self.max_pop}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.cycle_order not in CYCLE_ORDERS:
            raise ConfigError(f"unknown cycle_order {self.cycle_order!r}")
        if self.backend.kind not in ("mock", "http"):
            raise ConfigError(f"unknown backend kind {self.backend.kind!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value, typ: str, name: str):
    try:
        if "bool" in typ:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if "int" in typ:
            return int(value)
        if "float" in typ:
            return float(value)
        return None if value is None else str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def _apply(obj, values: dict, prefix: str = "") -> None:
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in values.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {prefix}{key}")
        if key == "backend":
            if not isinstance(value, dict):
                raise ConfigError("'backend' must be a mapping")
            _apply(obj.backend, value, "backend.")
            continue
        setattr(obj, key, _coerce(value, str(fields[key].type), prefix + key))


def _env_values(env) -> tuple[dict, dict]:
    top, backend = {}, {}
    for f in dataclasses.fields(RunConfig):
        if f.name != "backend" and f"ORT_{f.name.upper()}" in env:
            top[f.name] = env[f"ORT_{f.name.upper()}"]
    for f in dataclasses.fields(BackendConfig):
        if f"ORT_BACKEND_{f.name.upper()}" in env:
            backend[f.name] = env[f"ORT_BACKEND_{f.name.upper()}"]
    return top, backend


def load_config(path: str | Path | None = None, *, env=None, overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from the file at ``path`` (or ``$ORT_CONFIG``), env vars and overrides.

    Relative paths in the file resolve against the file's directory.
    """
    env = os.environ if env is None else env
    cfg = RunConfig()
    path = path or env.get(CONFIG_ENV)
    if path:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except yaml.YAMLError as err:
            raise ConfigError(f"invalid YAML in {path}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _apply(cfg, data)
        base = path.parent
        for name in _PATH_FIELDS:
            value = getattr(cfg, name)
            if value and not Path(value).is_absolute():
                setattr(cfg, name, str(base / value))
        if cfg.backend.fixtures and not Path(cfg.backend.fixtures).is_absolute():
            cfg.backend.fixtures = str(base / cfg.backend.fixtures)
    top, backend = _env_values(env)
    _apply(cfg, top)
    _apply(cfg.backend, backend, "backend.")
    if overrides:
        _apply(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def toy_dir() -> Path:
    return Path(str(resources.files("ort.data").joinpath("toy")))


def toy_config(**overrides) -> RunConfig:
    """Configuration for the bundled toy KG, dataset and mock fixtures."""
    base = toy_dir()
    cfg = RunConfig(kg=str(base / "toy_kg.tsv"), dataset=str(base / "toy_dataset.jsonl"))
    cfg.backend.fixtures = str(base / "mock")
    if overrides:
        _apply(cfg, overrides)
    return cfg.validate()
