"""
Named system presets.
Built-ins cover the benchmark dimer, closed-system and chain test systems;
user presets are saved next to them in HEOMCAST_HOME/presets.json.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List

import config
from .errors import InvalidSpecError
from .system import SystemConfig, system_from_mapping, system_to_mapping

log = logging.getLogger(__name__)


# Ordered built-ins: always present, user presets are merged on top
_BUILTIN_PRESETS: Dict[str, Dict[str, Any]] = {
    # ── Dimers ────────────────────────────────────────────────────────────────
    "dimer":              {"sites": 2, "epsilon": [100, 0], "J": [100], "lambda": 35, "gamma": 53,
                           "temperature_K": 300},
    "dimer-symmetric":    {"sites": 2, "epsilon": [0, 0], "J": [100], "lambda": 35, "gamma": 53,
                           "temperature_K": 300},
    "dimer-closed":       {"sites": 2, "epsilon": [0, 0], "J": [100], "lambda": 1e-6, "gamma": 53,
                           "temperature_K": 300},
    "dimer-uncoupled":    {"sites": 2, "epsilon": [100, 0], "J": [0], "lambda": 35, "gamma": 53,
                           "temperature_K": 300},
    # ── Chains ────────────────────────────────────────────────────────────────
    "trimer-chain":       {"sites": 3, "epsilon": [100, 50, 0], "J": [100, 100], "lambda": 35,
                           "gamma": 53, "temperature_K": 300},
    "tetramer-chain":     {"sites": 4, "epsilon": [100, 50, 25, 0], "J": [100, 80, 60], "lambda": 35,
                           "gamma": 53, "temperature_K": 300},
}


class PresetManager:
    """Manages system presets: built-ins + user-saved presets."""

    def __init__(self, presets_file: str = None):
        self.presets_file = presets_file or str(config.HEOMCAST_HOME / "presets.json")
        self._user_presets: Dict[str, Dict[str, Any]] = {}
        Path(self.presets_file).parent.mkdir(parents=True, exist_ok=True)
        self._load()

    # ── Public API ────────────────────────────────────────────────────────────

    @property
    def presets(self) -> Dict[str, Dict[str, Any]]:
        """Merged view: built-ins first, then user presets (user wins on conflict)."""
        merged = {k: dict(v) for k, v in _BUILTIN_PRESETS.items()}
        merged.update(self._user_presets)
        return merged

    def is_builtin(self, name: str) -> bool:
        return name in _BUILTIN_PRESETS and name not in self._user_presets

    def get_preset(self, name: str) -> Dict[str, Any]:
        try:
            return self.presets[name]
        except KeyError:
            raise KeyError(f"unknown preset '{name}'") from None

    def get_config(self, name: str) -> SystemConfig:
        return system_from_mapping(self.get_preset(name))

    def save_preset(self, name: str, data: Dict[str, Any]) -> SystemConfig:
        """Validate and store a preset in canonical per-site form; returns the parsed config."""
        if not name.strip():
            raise InvalidSpecError("preset name must not be empty")
        parsed = system_from_mapping(data)
        self._user_presets[name] = system_to_mapping(parsed.system, parsed.bath, parsed.rho0_site)
        self._save()
        return parsed

    def delete_preset(self, name: str) -> bool:
        if name not in self._user_presets:
            return False
        del self._user_presets[name]
        self._save()
        return True

    def list_presets(self) -> List[str]:
        return list(self.presets.keys())

    # ── Persistence ───────────────────────────────────────────────────────────

    def _load(self):
        if os.path.exists(self.presets_file):
            try:
                data = json.loads(Path(self.presets_file).read_text())
                self._user_presets = {k: v for k, v in data.items() if isinstance(v, dict)}
            except (OSError, json.JSONDecodeError) as e:
                log.warning("Ignoring unreadable presets file %s: %s", self.presets_file, e)
                self._user_presets = {}

    def _save(self):
        try:
            Path(self.presets_file).write_text(json.dumps(self._user_presets, indent=2))
        except OSError as e:
            log.error("Error saving presets: %s", e)
