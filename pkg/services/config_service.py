import json
import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from models.errors import ConfigError

logger = logging.getLogger(__name__)

# options that can also come from the environment (or a .env file)
ENV_VARS = {
    "seed": "TRENDS_SEED",
    "jobs": "TRENDS_JOBS",
    "out_dir": "TRENDS_OUT_DIR",
}


class ConfigService:
    """
    Resolves command options: explicit flag > --config file > environment > default.

    A manifest.json written by a previous run is accepted as a config file;
    its `config` map is used and its `command` must match.
    """

    def __init__(self, env_file: Optional[str] = None):
        load_dotenv(env_file, override=False)

    def load_file(self, path: str, command: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except ValueError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        if "command" in payload and "config" in payload:
            if payload["command"] != command:
                raise ConfigError(
                    f"manifest {path} was written by '{payload['command']}', not '{command}'"
                )
            payload = payload["config"]
            if not isinstance(payload, dict):
                raise ConfigError(f"manifest {path} has no config map")
        return payload

    def resolve(self, defaults: Dict[str, Any], flags: Dict[str, Any],
                file_config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """`flags` holds None for every option not given on the command line."""
        file_config = file_config or {}
        unknown = sorted(set(file_config) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

        resolved = {}
        for key, default in defaults.items():
            if flags.get(key) is not None:
                resolved[key] = flags[key]
            elif key in file_config:
                resolved[key] = self._coerce(key, file_config[key], default)
            elif key in ENV_VARS and os.getenv(ENV_VARS[key]) not in (None, ""):
                resolved[key] = self._coerce(key, os.getenv(ENV_VARS[key]), default)
            else:
                resolved[key] = default
        return resolved

    @staticmethod
    def _coerce(key: str, value: Any, default: Any) -> Any:
        if default is None or value is None:
            return value
        try:
            if isinstance(default, bool):
                if isinstance(value, str):
                    return value.strip().lower() in ("1", "true", "yes")
                return bool(value)
            if isinstance(default, int):
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(value)
                return int(value)
            if isinstance(default, float):
                return float(value)
            if isinstance(default, (list, tuple)):
                if isinstance(value, str):
                    return [item.strip() for item in value.split(",") if item.strip()]
                return list(value)
            return type(default)(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config value for '{key}' has the wrong type: {value!r}") from None
