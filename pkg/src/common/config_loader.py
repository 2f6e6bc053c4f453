import json
import logging
import os
from configparser import ConfigParser

from .errors import ConfigError

logger = logging.getLogger("common.config")

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

DEFAULTS = {
    "RUN": {"workers": "0", "log_level": "INFO", "out_dir": "runs"},
    "SPECTRAL": {"safety": "0.9", "q_fraction": "0.5", "grid_points": "512", "slack": "1.05"},
    "BOUNDS": {"kappa": "0.5", "direct_terms": "262144", "scan_cap": "10000000"},
    "STORAGE": {"db_file": ""},
}


def load_config(config_file_path=None):
    if config_file_path is None:
        config_file_path = os.path.join(PROJECT_ROOT, "config.ini")

    cp = ConfigParser()
    cp.read_dict(DEFAULTS)
    if os.path.exists(config_file_path):
        cp.read(config_file_path)
    else:
        logger.warning(f"config file '{config_file_path}' not found, using built-in defaults and environment variables")
    return cp


def get_int(config, section, key):
    raw = config.get(section, key, fallback=DEFAULTS[section][key])
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}")


def get_float(config, section, key):
    raw = config.get(section, key, fallback=DEFAULTS[section][key])
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}")


def workers(config) -> int:
    raw = os.getenv("TWOSCALE_WORKERS")
    if raw:
        try:
            count = int(raw)
        except ValueError:
            raise ConfigError(f"TWOSCALE_WORKERS must be an integer, got {raw!r}")
    else:
        count = get_int(config, "RUN", "workers")
    if count <= 0:
        count = os.cpu_count() or 1
    return count


def log_level(config) -> str:
    return (os.getenv("TWOSCALE_LOG_LEVEL") or config.get("RUN", "log_level", fallback="INFO")).upper()


def registry_path(config):
    path = os.getenv("TWOSCALE_DB")
    if path is None:
        path = config.get("STORAGE", "db_file", fallback="")
    return path or None


def load_json_config(path, allowed_keys=None) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file '{path}' not found")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file '{path}' is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file '{path}' must hold a JSON object")

    # run manifests carry the config they were produced from
    if "config" in data and "manifest_version" in data:
        data = data["config"]

    if allowed_keys is not None:
        unknown = sorted(set(data) - set(allowed_keys))
        if unknown:
            raise ConfigError(f"unknown config key '{unknown[0]}' in '{path}'")
    return data
