"""Server configuration: JSON file, environment, and flag overrides.

Precedence is flag > environment > file > default. Environment variables
use the ``TRAILBOT_`` prefix with upper-cased key names, e.g.
``TRAILBOT_PORT=9000``; list values are comma-separated.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    store_path: str = ":memory:"
    k: int = 5
    cache_capacity: int = 128
    max_prompt_chars: int = 8000
    admin_enabled: bool = True
    session_ttl_seconds: float = 3600.0
    cors_origins: list[str] = field(
        default_factory=lambda: ["http://localhost:5173", "http://localhost:3000"]
    )
    # LLM backend: exactly one of mock / remote endpoint
    llm_mock: bool = True
    llm_mock_echo: bool = True
    llm_mock_script: str | None = None
    llm_mock_delay_ms_per_char: float = 0.0
    llm_endpoint: str | None = None
    llm_model: str | None = None
    # embedding backend: reference hashing unless an endpoint is configured
    embedder_endpoint: str | None = None
    embedder_model: str | None = None
    embedder_dim: int = 256
    # optional corpus auto-ingested at startup
    ingest_trails: str | None = None
    ingest_reviews: str | None = None
    # optional directory of static UI assets to serve at /
    static_dir: str | None = None

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.cache_capacity < 1:
            raise ConfigurationError("cache_capacity must be >= 1")
        if self.llm_mock and self.llm_endpoint:
            raise ConfigurationError(
                "exactly one llm backend: disable llm_mock or drop llm_endpoint"
            )
        if not self.llm_mock and not self.llm_endpoint:
            raise ConfigurationError(
                "exactly one llm backend: enable llm_mock or set llm_endpoint"
            )
        if self.llm_endpoint and not self.llm_model:
            raise ConfigurationError("llm_model is required with llm_endpoint")
        if self.embedder_endpoint and not self.embedder_model:
            raise ConfigurationError("embedder_model is required with embedder_endpoint")
        if self.embedder_dim < 1:
            raise ConfigurationError("embedder_dim must be >= 1")
        if bool(self.ingest_trails) != bool(self.ingest_reviews):
            raise ConfigurationError(
                "ingest_trails and ingest_reviews must be given together"
            )


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, kind, raw):
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        lowered = str(raw).strip().lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
        raise ConfigurationError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "list":
        if isinstance(raw, list):
            return [str(x) for x in raw]
        return [part.strip() for part in str(raw).split(",") if part.strip()]
    return None if raw is None else str(raw)


def _field_kind(f) -> str:
    if f.type in ("int",):
        return "int"
    if f.type in ("float",):
        return "float"
    if f.type in ("bool",):
        return "bool"
    if f.type.startswith("list"):
        return "list"
    return "str"


def load_config(
    path: str | Path | None = None,
    env: dict | None = None,
    overrides: dict | None = None,
) -> ServerConfig:
    """Build a validated ServerConfig from the three layers."""
    env = os.environ if env is None else env
    values: dict = {}

    if path is not None:
        try:
            file_values = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigurationError("config file must hold a JSON object")
        values.update(file_values)

    known = {f.name: _field_kind(f) for f in fields(ServerConfig)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

    for name, kind in known.items():
        env_key = f"TRAILBOT_{name.upper()}"
        if env_key in env:
            values[name] = env[env_key]
    if overrides:
        for name, value in overrides.items():
            if value is not None:
                values[name] = value

    coerced = {
        name: _coerce(name, known[name], raw)
        for name, raw in values.items()
        if raw is not None or known[name] == "str"
    }
    config = ServerConfig(**coerced)
    config.validate()
    return config
