"""Experiment configuration: validation, precedence and hashing.

A configuration is resolved from three layers, later layers winning:

1. the experiment's registered defaults,
2. a YAML file (``--config``),
3. command-line flags (``--seed``, ``--M``, ... and ``--set key=value``).

Nested mappings are merged key by key; lists and scalars are replaced.
The resolved configuration is fully serialisable and its hash (SHA-256
of the canonical JSON, excluding the output directory) is embedded in
every output file.
"""

from __future__ import annotations

import copy
import hashlib
import json
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator


class ConfigError(Exception):
    """Invalid or unreadable configuration (exit code 2)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Strict):
    """Model parameters.

    ``kind`` is ``"gl"`` (Ginzburg-Landau, uses ``eta``), ``"rd"``
    (reaction polynomial ``coefficients``) or ``"linear"`` (``N = 0``).
    """

    kind: Literal["gl", "rd", "linear"] = "gl"
    nu: float = Field(1.0, gt=0)
    eta: float = 1.0
    coefficients: list[float] | None = None
    g_list: list[str] = Field(default_factory=lambda: ["1", "cos", "sin"])
    M: int = Field(32, ge=1, le=256)
    s: float = Field(1.0, ge=0)

    @field_validator("coefficients")
    @classmethod
    def _nonempty(cls, v):
        if v is not None and len(v) == 0:
            raise ValueError("coefficients must not be empty")
        return v


class NumericsConfig(_Strict):
    """Discretisation and Monte Carlo sizes."""

    dt: float = Field(1e-3, gt=0)
    T: float = Field(1.0, gt=0)
    samples: int = Field(100, ge=1)
    chunk: int = Field(25, ge=1)


class ExperimentConfig(_Strict):
    """Everything that determines an experiment's output bytes."""

    experiment: str
    seed: int = Field(0, ge=0)
    model: ModelConfig = Field(default_factory=ModelConfig)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    params: dict[str, Any] = Field(default_factory=dict)
    tolerances: dict[str, float] = Field(default_factory=dict)
    output_dir: str | None = None

    def canonical(self) -> dict:
        """Resolved configuration without the output location."""
        data = self.model_dump(mode="json")
        data.pop("output_dir", None)
        return data

    def hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive merge; mappings merge key by key, everything else is replaced."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_assignment(text: str) -> dict:
    """``"a.b.c=value"`` to ``{"a": {"b": {"c": value}}}`` with YAML-typed value."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty key in {text!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value for {key!r}: {exc}") from exc
    for p in reversed(parts):
        value = {p: value}
    return value


def load_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path!r} must contain a mapping")
    return data


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def resolve(defaults: dict, file_data: dict | None = None, flags: dict | None = None) -> ExperimentConfig:
    """Apply the precedence ``defaults < file < flags`` and validate."""
    data = deep_merge(defaults, file_data or {})
    data = deep_merge(data, flags or {})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc
