import logging
import os
from pathlib import Path
from threading import RLock
from typing import Optional

import yaml
from munch import Munch

from src.utils.errors import ParameterError

DEFAULT_ENUMERATION_CAP = 10**7
DEFAULT_SINGULAR_CUTOFF = 1e-12
DEFAULT_SPOT_CHECK_TRAJECTORIES = 100
CAP_ENVIRONMENT_VARIABLE = "POMDP_OPE_ENUMERATION_CAP"

DEFAULT_SETTINGS = {
    "enumeration_cap": DEFAULT_ENUMERATION_CAP,
    "singular_cutoff": DEFAULT_SINGULAR_CUTOFF,
    "likelihood_floor": None,
    "spot_check_trajectories": DEFAULT_SPOT_CHECK_TRAJECTORIES,
    "workers": 1,
    "output_dir": "./results",
}
NUMERIC_SETTINGS = {
    "enumeration_cap": int,
    "singular_cutoff": float,
    "likelihood_floor": float,
    "spot_check_trajectories": int,
    "workers": int,
}


def resolve_enumeration_cap(cap: Optional[int] = None) -> int:
    """
    Resolve the enumeration cap: explicit value, then the environment variable, then the default.

    :param cap: Explicit cap, wins when given
    :return: Positive integer cap
    """
    if cap is None:
        raw = os.environ.get(CAP_ENVIRONMENT_VARIABLE)
        if raw:
            try:
                cap = int(float(raw))
            except ValueError:
                raise ParameterError(f"{CAP_ENVIRONMENT_VARIABLE}={raw!r} is not a number")
        else:
            cap = DEFAULT_ENUMERATION_CAP
    cap = int(cap)
    if cap <= 0:
        raise ParameterError(f"enumeration cap must be positive, got {cap}")
    return cap


class SettingsManager:
    def __init__(self, settings_dir: Optional[Path] = None):
        self._lock = RLock()
        self.settings = Munch(DEFAULT_SETTINGS)

        read_path, write_path = self._determine_settings_paths(settings_dir)
        self.read_path = Path(read_path)
        self.write_path = Path(write_path)

        self._load_settings()

    def _determine_settings_paths(self, settings_dir: Optional[Path]):
        """
        Determine .settings.yml paths (READ vs WRITE) and create the .pomdp-ope folder if needed

        - settings_path_read: Path from which we'll load settings
        - settings_path_write: Path to which we'll save settings (always <settings_dir>/.settings.yml)
        """

        app_dir = Path(settings_dir) if settings_dir else Path.home() / ".pomdp-ope"
        app_dir.mkdir(parents=True, exist_ok=True)

        app_settings = app_dir / ".settings.yml"
        local_settings = Path.cwd() / ".settings.yml"

        # 1) Prefer the per-user settings file
        if app_settings.exists():
            settings_path_read = str(app_settings)
        # 2) Else a local .settings.yml next to the experiment
        elif local_settings.exists():
            settings_path_read = str(local_settings)
        # 3) Else fall back to the per-user path, created on first save
        else:
            settings_path_read = str(app_settings)

        settings_path_write = str(app_settings)

        logging.debug(f"settings_path_read = {settings_path_read}")
        logging.debug(f"settings_path_write = {settings_path_write}")

        return settings_path_read, settings_path_write

    def _load_settings(self):
        with self._lock:
            loaded = self._load_from_file(self.read_path)
            self.settings = Munch({**DEFAULT_SETTINGS, **loaded})
            if os.environ.get(CAP_ENVIRONMENT_VARIABLE):
                self.settings.enumeration_cap = resolve_enumeration_cap()

    def _load_from_file(self, path: Path) -> dict:
        try:
            with path.open("r") as f:
                data = yaml.safe_load(f) or {}
                return data
        except FileNotFoundError:
            logging.debug(f"{path} not found, using defaults.")
            return {}
        except yaml.YAMLError as e:
            logging.error(f"Error parsing {path}: {e}")
            return {}

    def save_settings(self):
        with self._lock:
            try:
                with open(self.write_path, "w") as f:
                    yaml.safe_dump(self.settings.toDict(), f)
                    logging.debug(f"Saved settings to {self.write_path}")
            except Exception as e:
                logging.error(f"Failed to save settings to {self.write_path}: {e}")

    def get_settings(self) -> Munch:
        with self._lock:
            return self.settings

    def get_settings_key(self, key, default=None):
        with self._lock:
            return self.settings.get(key, default)

    def set_settings_key(self, key, value):
        if key not in DEFAULT_SETTINGS:
            raise ParameterError(f"unknown setting '{key}', known: {sorted(DEFAULT_SETTINGS)}")
        with self._lock:
            self.settings[key] = value

    def get_number(self, key, kind=float, allow_none: bool = False):
        """
        Read a numeric setting. YAML reads `1e-5` as a string, so values are coerced.

        Integer settings may be 0; float settings must be positive.

        :raises ParameterError: the value is missing, not a number or out of range
        """
        value = self.get_settings_key(key, DEFAULT_SETTINGS.get(key))
        if value is None and allow_none:
            return None
        try:
            number = kind(float(value))
        except (TypeError, ValueError):
            raise ParameterError(f"setting {key}={value!r} is not a number")
        if number < 0 or (number == 0 and kind is not int):
            raise ParameterError(f"setting {key} is out of range: {number}")
        return number
