"""Persistent solver and derivative-check defaults for the tapopf CLI."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .global_variables import (
    FD_ATOL,
    FD_HESSIAN_RTOL,
    FD_HESSIAN_STEP,
    FD_RTOL,
    FD_STEP,
    IPM_MAX_ITER,
    IPM_TOL,
)

logger = logging.getLogger(__name__)

OUTPUT_MODES = ("table", "json")
_POSITIVE_FIELDS = ("tol", "fd_step", "fd_hessian_step", "rtol", "hessian_rtol", "atol")


class SettingsError(ValueError):
    """Raised when a setting is outside its valid range."""


@dataclass
class TapOpfSettings:
    """Container for configurable tapopf CLI defaults."""

    max_iter: int = IPM_MAX_ITER
    tol: float = IPM_TOL
    trials: int = 50
    seed: int = 0
    fd_step: float = FD_STEP
    fd_hessian_step: float = FD_HESSIAN_STEP
    rtol: float = FD_RTOL
    hessian_rtol: float = FD_HESSIAN_RTOL
    atol: float = FD_ATOL
    output: str = "table"

    def validate(self) -> "TapOpfSettings":
        if self.trials < 1:
            raise SettingsError(f"trials must be at least 1, got {self.trials}")
        if self.max_iter < 1:
            raise SettingsError(f"max_iter must be at least 1, got {self.max_iter}")
        for name in _POSITIVE_FIELDS:
            if not getattr(self, name) > 0:
                raise SettingsError(f"{name} must be positive, got {getattr(self, name)}")
        if self.output not in OUTPUT_MODES:
            raise SettingsError(f"output must be one of {', '.join(OUTPUT_MODES)}, got {self.output!r}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return {field.name: getattr(self, field.name) for field in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TapOpfSettings":
        """Create settings from a mapping; missing keys take defaults, unknown keys are ignored."""
        base = cls()
        kwargs = {}
        for field in fields(base):
            value = data.get(field.name, getattr(base, field.name))
            default = getattr(base, field.name)
            kwargs[field.name] = type(default)(value)
        return cls(**kwargs)

    def merge_with_namespace(self, namespace: argparse.Namespace) -> tuple["TapOpfSettings", set[str]]:
        """Return new settings updated with the non-None values of an ``argparse`` namespace."""
        updates: dict[str, Any] = {}
        for field in fields(self):
            value = getattr(namespace, field.name, None)
            if value is not None:
                updates[field.name] = value
        if not updates:
            return self, set()
        current = self.to_dict()
        current.update(updates)
        return type(self)(**current), set(updates)


def default_settings_path() -> Path:
    """Return the path where persisted settings are stored."""
    if sys.platform.startswith("win"):
        root = os.environ.get("APPDATA")
        root = Path(root) if root is not None else Path.home() / "AppData" / "Roaming"
        return root / "TapOpf" / "settings.json"

    config_root = os.environ.get("XDG_CONFIG_HOME")
    config_root = Path(config_root) if config_root is not None else Path.home() / ".config"
    return config_root / "tapopf" / "settings.json"


def load_settings(path: Path | None = None) -> TapOpfSettings:
    """Load persisted settings, falling back to defaults if unavailable."""
    target = Path(path or default_settings_path())
    if not target.exists():
        return TapOpfSettings()
    try:
        with target.open("r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if not isinstance(payload, Mapping):
            raise ValueError("settings file does not hold a JSON object")
        return TapOpfSettings.from_dict(payload)
    except (OSError, ValueError, TypeError) as exc:
        logger.warning("ignoring settings file %s: %s", target, exc)
        return TapOpfSettings()


def save_settings(settings: TapOpfSettings, path: Path | None = None) -> None:
    """Persist settings to disk as JSON."""
    target = Path(path or default_settings_path())
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as handle:
        json.dump(settings.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


__all__ = [
    "OUTPUT_MODES",
    "SettingsError",
    "TapOpfSettings",
    "default_settings_path",
    "load_settings",
    "save_settings",
]
