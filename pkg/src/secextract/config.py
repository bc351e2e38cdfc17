"""Pipeline configuration loaded from a YAML file.

Relative paths in the file are resolved against the file's directory. Only
the API credential comes from the environment (``backend.api_key_env``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .metrics import PriceSheet

TASKS = ("payratio", "cam")
TASK_FORMS = {"payratio": "DEF 14A", "cam": "10-K"}


class ConfigError(ValueError):
    """Missing or invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"config key '{key}': {message}")
        self.key = key


@dataclass
class Budget:
    rpm: int = 500
    tpm: int = 200_000
    rpd: int | None = None
    max_outstanding: int = 500


@dataclass
class BackendConfig:
    kind: str = "offline"  # offline | live
    url: str | None = None
    model: str = "gpt-4o-mini"
    api_key_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    timeout: float = 120.0
    seed: int = 0
    p_malformed: float = 0.0
    p_rate_limit: float = 0.0


@dataclass
class EdgarConfig:
    user_agent: str | None = None
    base_url: str = "https://www.sec.gov"
    max_per_second: float = 10.0
    quarters: tuple[str, str] | None = None  # ("2019Q1", "2019Q4")
    ciks: tuple[int, ...] = ()
    workers: int = 4


@dataclass
class PipelineConfig:
    manifest: Path
    cache_dir: Path
    out_dir: Path
    tasks: tuple[str, ...] = TASKS
    patterns: Path | None = None
    templates: dict[str, Path] = field(default_factory=dict)
    batch_size: dict[str, int] = field(default_factory=lambda: {"payratio": 1, "cam": 1})
    budget: Budget = field(default_factory=Budget)
    backend: BackendConfig = field(default_factory=BackendConfig)
    max_attempts: int = 5
    cooldown_s: float = 15.0
    seed: int = 0
    prices: PriceSheet = field(default_factory=lambda: PriceSheet(0.15, 0.60))
    truth: dict[str, Path] = field(default_factory=dict)
    edgar: EdgarConfig = field(default_factory=EdgarConfig)
    estimator: str = "chars4"
    escalation: tuple[str, ...] = ("unmodified", "moderate", "example")

    def __post_init__(self) -> None:
        for task, n in self.batch_size.items():
            if task not in TASKS:
                raise ConfigError(f"batch_size.{task}", "unknown task")
            if not isinstance(n, int) or n < 1:
                raise ConfigError(f"batch_size.{task}", "must be an integer >= 1")
        b = self.budget
        for name in ("rpm", "tpm", "max_outstanding"):
            if getattr(b, name) <= 0:
                raise ConfigError(f"budget.{name}", "must be positive")
        if b.rpd is not None and b.rpd <= 0:
            raise ConfigError("budget.rpd", "must be positive")
        if self.backend.kind not in ("offline", "live"):
            raise ConfigError("backend.kind", "must be 'offline' or 'live'")
        if self.backend.kind == "live":
            if not self.backend.url:
                raise ConfigError("backend.url", "required for the live backend")
            if not self.backend.model:
                raise ConfigError("backend.model", "required for the live backend")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts", "must be >= 1")
        if self.cooldown_s < 0:
            raise ConfigError("cooldown_s", "must be >= 0")
        for t in self.tasks:
            if t not in TASKS:
                raise ConfigError("task", f"unknown task {t!r}")

    def task_dir(self, task: str) -> Path:
        return self.out_dir / task

    def batch_for(self, task: str) -> int:
        return self.batch_size.get(task, 1)


_REQUIRED = ("manifest", "cache_dir", "out_dir")


def _path(base: Path, value: str | os.PathLike) -> Path:
    p = Path(value).expanduser()
    return p if p.is_absolute() else (base / p)


def _section(raw: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = raw.get(key) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(key, "must be a mapping")
    return value


def _build(cls, raw: Mapping[str, Any], prefix: str):
    known = cls.__dataclass_fields__
    for k in raw:
        if k not in known:
            raise ConfigError(f"{prefix}.{k}", "unknown key")
    try:
        return cls(**raw)
    except TypeError as e:
        raise ConfigError(prefix, str(e)) from None


def config_from_mapping(raw: Mapping[str, Any], base_dir: str | os.PathLike = ".",
                        overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Build a config from parsed YAML plus flat CLI overrides.

    ``overrides`` keys use dotted paths (``backend.kind``); ``None`` values
    are ignored so unset flags do not clobber the file.
    """
    raw = _apply_overrides(dict(raw), overrides or {})
    base = Path(base_dir)
    for key in _REQUIRED:
        if not raw.get(key):
            raise ConfigError(key, "missing")

    task = raw.get("task", "both")
    tasks = TASKS if task in ("both", "all") else (task,)

    edgar_raw = dict(_section(raw, "edgar"))
    if "quarters" in edgar_raw and edgar_raw["quarters"] is not None:
        q = edgar_raw["quarters"]
        if not (isinstance(q, (list, tuple)) and len(q) == 2):
            raise ConfigError("edgar.quarters", "must be [first, last], e.g. [2019Q1, 2019Q4]")
        edgar_raw["quarters"] = (str(q[0]), str(q[1]))
    if "ciks" in edgar_raw:
        edgar_raw["ciks"] = tuple(int(c) for c in edgar_raw["ciks"] or ())

    prices_raw = _section(raw, "prices")
    try:
        prices = PriceSheet(float(prices_raw.get("usd_per_1m_input", 0.15)),
                            float(prices_raw.get("usd_per_1m_output", 0.60)))
    except ValueError as e:
        raise ConfigError("prices", str(e)) from None

    batch = raw.get("batch_size", {"payratio": 1, "cam": 1})
    if isinstance(batch, int):
        batch = {t: batch for t in TASKS}

    try:
        return PipelineConfig(
            manifest=_path(base, raw["manifest"]),
            cache_dir=_path(base, raw["cache_dir"]),
            out_dir=_path(base, raw["out_dir"]),
            tasks=tuple(tasks),
            patterns=_path(base, raw["patterns"]) if raw.get("patterns") else None,
            templates={k: _path(base, v) for k, v in _section(raw, "templates").items()},
            batch_size=dict(batch),
            budget=_build(Budget, _section(raw, "budget"), "budget"),
            backend=_build(BackendConfig, _section(raw, "backend"), "backend"),
            max_attempts=int(raw.get("max_attempts", 5)),
            cooldown_s=float(raw.get("cooldown_s", 15.0)),
            seed=int(raw.get("seed", 0)),
            prices=prices,
            truth={k: _path(base, v) for k, v in _section(raw, "truth").items()},
            edgar=_build(EdgarConfig, edgar_raw, "edgar"),
            estimator=str(raw.get("estimator", "chars4")),
            escalation=tuple(raw.get("escalation", ("unmodified", "moderate", "example"))),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("config", str(e)) from None


def _apply_overrides(raw: dict, overrides: Mapping[str, Any]) -> dict:
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            child = node.get(p)
            node[p] = child = dict(child) if isinstance(child, Mapping) else {}
            node = child
        node[leaf] = value
    return raw


def load_config(path: str | os.PathLike,
                overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError("config", f"invalid YAML in {path}: {e}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError("config", "top level must be a mapping")
    return config_from_mapping(raw, path.parent, overrides)
