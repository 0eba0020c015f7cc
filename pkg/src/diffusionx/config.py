"""Service configuration: flat key=value file with DIFFX_-prefixed env overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from .core import GRID_MAX, GRID_MIN

ENV_PREFIX = "DIFFX_"


class ConfigError(ValueError):
    pass


@dataclass
class ServiceConfig:
    listen_addr: str = "127.0.0.1:8099"
    edge_backend: str = "mock"  # "mock" or a remote base URL
    cloud_backend: str = "mock"
    edge_weights: Optional[str] = None
    cloud_weights: Optional[str] = None
    predictor_enabled: bool = False
    fixed_strength: float = 0.90
    uplink_bps: int = 20_000_000
    downlink_bps: int = 20_000_000
    base_steps_edge: int = 25
    base_steps_cloud: int = 25
    t_max: int = 999
    edge_dim: int = 384
    cloud_text_dim: int = 768
    image_dim: int = 512
    resolution: int = 512
    target_payload_bytes: int = 500_000
    persistence_path: str = "diffx_events.jsonl"
    image_dir: str = "diffx_images"
    frontend_dir: Optional[str] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not (GRID_MIN <= self.fixed_strength <= GRID_MAX):
            raise ConfigError(
                f"fixed_strength {self.fixed_strength} outside [{GRID_MIN}, {GRID_MAX}]"
            )
        if self.base_steps_edge < 1 or self.base_steps_cloud < 1:
            raise ConfigError("base steps must be >= 1")
        if self.uplink_bps <= 0 or self.downlink_bps <= 0:
            raise ConfigError("bandwidths must be positive")
        if self.predictor_enabled and not (self.edge_weights and self.cloud_weights):
            raise ConfigError("predictor_enabled requires edge_weights and cloud_weights paths")


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, kind: type, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{name}: cannot parse boolean from {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse integer from {raw!r}") from exc
    if kind is float:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse float from {raw!r}") from exc
    return raw or None if name in ("edge_weights", "cloud_weights", "frontend_dir") else raw


def parse_config_file(path: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, raw = stripped.split("=", 1)
            values[key.strip()] = raw.strip()
    return values


def load_config(path: Optional[str] = None, env: Optional[Mapping[str, str]] = None) -> ServiceConfig:
    """Build a ServiceConfig from defaults <- config file <- DIFFX_* env vars."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        raw.update(parse_config_file(path))
    type_by_name = {
        f.name: (type(f.default) if f.default is not None else str)
        for f in fields(ServiceConfig)
    }
    for key in list(raw):
        if key not in type_by_name:
            raise ConfigError(f"unknown config key {key!r}")
    for name in type_by_name:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            raw[name] = env[env_key]
    kwargs = {}
    for name, raw_value in raw.items():
        kwargs[name] = _coerce(name, type_by_name[name], raw_value)
    return ServiceConfig(**kwargs)
