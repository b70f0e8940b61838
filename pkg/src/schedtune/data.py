"""Resolution and loading of the calibration data files.

Device classes, preset distributions and the function catalog ship with the
package under ``schedtune/data``.  An alternative directory can be selected
with the ``SCHEDTUNE_DATA_DIR`` environment variable or an explicit path,
which makes it easy to run experiments against modified calibrations without
touching the installed package.
"""
from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

from .errors import ConfigError

DATA_DIR_ENV = "SCHEDTUNE_DATA_DIR"
SCHEMA_VERSION = 1

_FILES = ("devices.json", "presets.json", "functions.json")


def data_dir(override: str | os.PathLike | None = None) -> Path:
    """Directory holding the calibration files, honoring the env override."""
    if override is not None:
        return Path(override)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("schedtune") / "data"))


def load_json(name: str, override: str | os.PathLike | None = None) -> dict:
    if name not in _FILES:
        raise ConfigError(f"unknown data file {name!r}, expected one of {_FILES}")
    path = data_dir(override) / name
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version {version!r} unsupported (expected {SCHEMA_VERSION})"
        )
    return payload
