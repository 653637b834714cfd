from __future__ import annotations

from pathlib import Path


def repo_root() -> Path:
    return Path.cwd()


def config_dir() -> Path:
    return repo_root() / "config"


def default_config_path() -> Path:
    return config_dir() / "nopsim.yaml"


def schema_dir() -> Path:
    return Path(__file__).resolve().parent.parent.parent / "schema"


def config_schema_path() -> Path:
    return schema_dir() / "nopsim_config.schema.json"
