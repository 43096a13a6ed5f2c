import os
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ConfigError

load_dotenv()

_REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


class Config:
    VERSION = "0.3.0"

    # Sampling
    SEED = int(os.getenv("JOINTORBIT_SEED", "42"))
    TRIALS = int(os.getenv("JOINTORBIT_TRIALS", "32"))
    TOL = float(os.getenv("JOINTORBIT_TOL", "1e-9"))
    RELAXED_TOL = float(os.getenv("JOINTORBIT_RELAXED_TOL", "1e-6"))
    EXACT_GRID = int(os.getenv("JOINTORBIT_EXACT_GRID", "1000000"))

    # Flows
    FLOW_STEPS = int(os.getenv("JOINTORBIT_FLOW_STEPS", "1024"))
    FLOW_MAX_NORM = 0.5

    # Files
    FIXTURES_DIR = os.getenv("JOINTORBIT_FIXTURES_DIR", os.path.join(_REPO_ROOT, "fixtures"))
    SETTINGS_FILE = os.getenv("JOINTORBIT_SETTINGS", "jointorbit.yaml")

    # Logging
    LOG_LEVEL = os.getenv("JOINTORBIT_LOG_LEVEL", "WARNING")

    # LangSmith
    LANGSMITH_API_KEY = os.getenv("LANGSMITH_API_KEY")
    LANGSMITH_PROJECT = os.getenv("LANGSMITH_PROJECT", "jointorbit")

    SETTINGS_KEYS = ("seed", "trials", "tol", "relaxed_tol", "flow_steps", "exact_grid")

    @classmethod
    def load_settings(cls, path: Optional[str] = None) -> Dict[str, Any]:
        """Read overrides from the YAML settings file, if there is one"""
        path = path or cls.SETTINGS_FILE
        if not os.path.exists(path):
            return {}

        with open(path, "r", encoding="utf-8") as file:
            settings = yaml.safe_load(file) or {}

        if not isinstance(settings, dict):
            raise ConfigError(f"Settings file {path} must contain a mapping")

        unknown = sorted(set(settings) - set(cls.SETTINGS_KEYS))
        if unknown:
            raise ConfigError(f"Unknown settings in {path}: {', '.join(unknown)}")

        return settings

    @classmethod
    def settings(cls, path: Optional[str] = None) -> Dict[str, Any]:
        values = {
            "seed": cls.SEED,
            "trials": cls.TRIALS,
            "tol": cls.TOL,
            "relaxed_tol": cls.RELAXED_TOL,
            "flow_steps": cls.FLOW_STEPS,
            "exact_grid": cls.EXACT_GRID,
        }
        values.update(cls.load_settings(path))
        return values

    @classmethod
    def validate_required_config(cls, path: Optional[str] = None) -> bool:
        """Validate that the sampling configuration is usable"""
        values = cls.settings(path)

        checks = {
            "trials": values["trials"] >= 1,
            "tol": 0 < values["tol"] < 1,
            "relaxed_tol": 0 < values["relaxed_tol"] < 1,
            "flow_steps": values["flow_steps"] >= 1,
            "exact_grid": values["exact_grid"] >= 2,
            "seed": 0 <= values["seed"] < 2**64,
        }

        invalid = [name for name, ok in checks.items() if not ok]

        if invalid:
            raise ConfigError(f"Invalid configuration values: {', '.join(invalid)}", {"keys": invalid})

        return True

    @classmethod
    def default_sample_cfg(cls, path: Optional[str] = None, **overrides: Any):
        from .models import SampleCfg

        values = cls.settings(path)
        fields = {
            "seed": values["seed"],
            "trials": values["trials"],
            "tol": values["tol"],
            "exact_grid": values["exact_grid"],
        }
        fields.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return SampleCfg(**fields)
        except ValidationError as e:
            problems = "; ".join(err["msg"] for err in e.errors())
            raise ConfigError(f"Invalid sampling options: {problems}")
