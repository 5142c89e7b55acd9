"""Configuration: data-file locations, sidecar journal, backend selection.

Search order for the config file: an explicit ``--config`` path, the
``CONTENTORACLE_CONFIG`` environment variable, then the per-user config
directory. Missing config falls back to the bundled data files under the
package's data directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError

ENV_VAR = "CONTENTORACLE_CONFIG"

DATA_DIR = Path(__file__).resolve().parent / "data"

_CONFIG_KEYS = {
    "mime_types_path", "magic_path", "active_types_path",
    "models_dir", "sidecar_path", "backend",
}

_BACKENDS = ("auto", "xattr", "sidecar")


def _default_sidecar() -> Path:
    state_home = os.environ.get("XDG_STATE_HOME")
    base = Path(state_home) if state_home else Path.home() / ".local" / "state"
    return base / "contentoracle" / "sidecar.jsonl"


@dataclass(frozen=True)
class Config:
    mime_types_path: Path = DATA_DIR / "mime.snapshot.types"
    magic_path: Path = DATA_DIR / "magic.signatures"
    active_types_path: Path = DATA_DIR / "active.types"
    models_dir: Path = DATA_DIR / "models"
    sidecar_path: Path = _default_sidecar()
    backend: str = "auto"


def _user_config_path() -> Path:
    config_home = os.environ.get("XDG_CONFIG_HOME")
    base = Path(config_home) if config_home else Path.home() / ".config"
    return base / "contentoracle" / "config.json"


def load_config(explicit_path: str | None = None) -> Config:
    """Resolve the effective configuration.

    An explicitly named or environment-selected file must exist and parse;
    the per-user default is optional.
    """
    path: Path | None = None
    required = False
    if explicit_path:
        path, required = Path(explicit_path), True
    elif os.environ.get(ENV_VAR):
        path, required = Path(os.environ[ENV_VAR]), True
    else:
        candidate = _user_config_path()
        if candidate.is_file():
            path = candidate

    config = Config()
    if path is None:
        return config
    try:
        doc = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        if required:
            raise ConfigError(f"config file not found: {path}") from None
        return config
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    if "backend" in doc and doc["backend"] not in _BACKENDS:
        raise ConfigError(f"backend must be one of {_BACKENDS}, got {doc['backend']!r}")
    updates = {
        key: (Path(value) if key != "backend" else value)
        for key, value in doc.items()
    }
    return replace(config, **updates)
