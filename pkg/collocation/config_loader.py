"""Run configuration files: flat ``key = value`` text or YAML."""

import logging
from pathlib import Path
from typing import Any, Dict, Union

import yaml

from collocation.config import RunConfig
from collocation.errors import ConfigError

logger = logging.getLogger(__name__)

YAML_SUFFIXES = (".yaml", ".yml")


def parse_key_value_text(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped.

    Example:
    ```
    command = reproduce-table1
    kernel = power_convolution
    kernel.a = 1
    G.b = 2   # square root nonlinearity
    sweep.h = 0.1, 0.01
    ```
    """
    data: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in data:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        data[key] = value
    return data


def _flatten(data: Any, prefix: str = "") -> Dict[str, Any]:
    """Nested YAML mappings become dotted keys (``kernel: {a: 1}`` -> ``kernel.a``).

    A mapping may carry its own value under ``name`` (``kernel: {name: constant}``).
    """
    if not isinstance(data, dict):
        raise ConfigError(f"Expected a mapping at {prefix or 'top level'}, got {type(data).__name__}")
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if prefix and key == "name":
            flat[prefix] = value
            continue
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted))
        else:
            flat[dotted] = value
    return flat


def load_config_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e

    if path.suffix.lower() in YAML_SUFFIXES:
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {path}: {e}") from e
        return _flatten(data)
    return parse_key_value_text(text)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    config = RunConfig.from_mapping(load_config_mapping(path))
    logger.info(f"Loaded run configuration '{config.command}' from {path}")
    return config


def save_run_config(config: RunConfig, path: Union[str, Path]) -> None:
    """Write a configuration that ``load_run_config`` reads back unchanged."""
    path = Path(path)
    data = config.to_mapping()
    if path.suffix.lower() in YAML_SUFFIXES:
        with open(path, "w") as f:
            yaml.dump(data, f, default_flow_style=False, sort_keys=False)
    else:
        path.write_text("".join(f"{key} = {value}\n" for key, value in data.items()))
    logger.info(f"Saved run configuration to {path}")
