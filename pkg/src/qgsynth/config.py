"""Runtime configuration with flags > env > config file > defaults precedence.

The config file is TOML-like key/value lines::

    # comment
    endpoint = "https://api.example.com/v1"
    model_name = gpt-3.5-turbo
    temperature = 0.9
    requests_per_minute = 60

Values parse as int, float, bool (true/false), or string (quotes optional).
Environment variables use the QGSYNTH_ prefix with uppercased keys
(QGSYNTH_ENDPOINT, QGSYNTH_MODEL_NAME, ...). The API credential itself is
never part of this config; it is read from the environment variable named by
``api_key_env`` at call time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .gateway import GatewayConfig

ENV_PREFIX = "QGSYNTH_"


class ConfigError(ValueError):
    pass


_GATEWAY_KEYS = {f.name: f.type for f in fields(GatewayConfig)}

_TOOL_DEFAULTS: dict[str, Any] = {
    "parallelism": 4,
    "failure_threshold": 0.1,
    "max_input_tokens": 512,
    "seed": 0,
    "review_cap": 100,
    "length_bin_width": 10,
    "perplexity_bin_width": 1.0,
}

_INT_KEYS = {
    "max_output_tokens", "max_retries", "context_window",
    "parallelism", "max_input_tokens", "seed", "review_cap", "length_bin_width",
}
_FLOAT_KEYS = {
    "temperature", "top_p", "backoff_base", "backoff_cap", "requests_per_minute",
    "timeout", "failure_threshold", "perplexity_bin_width",
}


def _coerce(key: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} expects an integer, got {text!r}") from exc
    if key in _FLOAT_KEYS:
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} expects a number, got {text!r}") from exc
    return text


def parse_config_file(path: str | Path) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}: line {lineno}: empty key")
        values[key] = _coerce(key, value.strip())
    return values


def _env_values(env: Mapping[str, str]) -> dict[str, Any]:
    values: dict[str, Any] = {}
    known = set(_GATEWAY_KEYS) | set(_TOOL_DEFAULTS)
    for key in known:
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _coerce(key, raw)
    return values


@dataclass(frozen=True)
class ToolkitConfig:
    gateway: GatewayConfig
    parallelism: int = 4
    failure_threshold: float = 0.1
    max_input_tokens: int = 512
    seed: int = 0
    review_cap: int = 100
    length_bin_width: int = 10
    perplexity_bin_width: float = 1.0


def resolve_config(
    config_path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> ToolkitConfig:
    """Merge defaults, config file, environment, and flag overrides (in that
    order of increasing precedence). ``overrides`` entries that are None are
    treated as unset."""
    merged: dict[str, Any] = dict(_TOOL_DEFAULTS)
    if config_path is not None:
        file_values = parse_config_file(config_path)
        unknown = set(file_values) - set(_GATEWAY_KEYS) - set(_TOOL_DEFAULTS)
        if unknown:
            raise ConfigError(f"{config_path}: unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    merged.update(_env_values(env if env is not None else os.environ))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = _coerce(key, value) if isinstance(value, str) else value

    gateway_kwargs = {k: v for k, v in merged.items() if k in _GATEWAY_KEYS}
    tool_kwargs = {k: v for k, v in merged.items() if k in _TOOL_DEFAULTS}
    return ToolkitConfig(gateway=GatewayConfig(**gateway_kwargs), **tool_kwargs)
