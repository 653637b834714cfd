from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from jsonschema import ValidationError, validate as jsonschema_validate

from nopsim.config.paths import config_schema_path, default_config_path
from nopsim.isa.ports import FIRST_PROCESSOR_ID, PERIPHERAL_LINES
from nopsim.link.transport import DEFAULT_CONNECT_TIMEOUT, DEFAULT_HOST


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulatorConfig:
    processor_id: int = FIRST_PROCESSOR_ID
    debug: bool = False
    trace_mask: int = 0
    intern_mask: int = 0
    extern_mask: int = 0
    files: Tuple[str, ...] = ()
    routes: Dict[int, int] = field(default_factory=dict)
    line_destinations: Dict[int, int] = field(default_factory=dict)
    stub_links: int = 0
    host: str = DEFAULT_HOST
    connect_timeout: float = DEFAULT_CONNECT_TIMEOUT
    max_rounds: Optional[int] = None


def _normalize_int(value: Any, default: int) -> int:
    if isinstance(value, bool):
        return default
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.strip():
        try:
            return int(value.strip(), 0)
        except ValueError:
            return default
    return default


def _normalize_int_map(value: Any) -> Dict[int, int]:
    if not isinstance(value, dict):
        return {}
    normalized: Dict[int, int] = {}
    for key, item in value.items():
        k = _normalize_int(key, -1)
        v = _normalize_int(item, -1)
        if k >= 0 and v >= 0:
            normalized[k] = v
    return normalized


def _normalize_files(value: Any) -> Tuple[str, ...]:
    if not isinstance(value, list):
        return ()
    return tuple(v.strip() for v in value if isinstance(v, str) and v.strip())


def _load_schema(schema_path: Optional[Path]) -> Dict[str, Any]:
    path = schema_path or config_schema_path()
    with path.open("r", encoding="utf-8") as f:
        return json.load(f)


def load_simulator_config(
    path: Optional[Path] = None,
    schema_path: Optional[Path] = None,
) -> SimulatorConfig:
    """Load the YAML configuration; a missing default file means built-in defaults.

    An explicitly given path must exist.
    """
    config_path = path or default_config_path()
    if not config_path.exists():
        if path is not None:
            raise ConfigError(f"Config file not found: {config_path}")
        return SimulatorConfig()

    try:
        with config_path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{config_path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping.")

    try:
        jsonschema_validate(instance=data, schema=_load_schema(schema_path))
    except ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{config_path}: {location}: {exc.message}") from exc

    line_destinations = _normalize_int_map(data.get("line_destinations"))
    for line in line_destinations:
        if line >= PERIPHERAL_LINES:
            raise ConfigError(f"{config_path}: line_destinations: no peripheral line {line}.")

    max_rounds = data.get("max_rounds")
    return SimulatorConfig(
        processor_id=_normalize_int(data.get("processor_id"), FIRST_PROCESSOR_ID),
        debug=bool(data.get("debug", False)),
        trace_mask=_normalize_int(data.get("trace_mask"), 0),
        intern_mask=_normalize_int(data.get("intern_mask"), 0),
        extern_mask=_normalize_int(data.get("extern_mask"), 0),
        files=_normalize_files(data.get("files")),
        routes=_normalize_int_map(data.get("routes")),
        line_destinations=line_destinations,
        stub_links=_normalize_int(data.get("stub_links"), 0),
        host=str(data.get("host") or DEFAULT_HOST),
        connect_timeout=float(data.get("connect_timeout") or DEFAULT_CONNECT_TIMEOUT),
        max_rounds=max_rounds if isinstance(max_rounds, int) else None,
    )
