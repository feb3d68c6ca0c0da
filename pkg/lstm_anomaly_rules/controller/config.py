import json
import os
from typing import Any, Dict, List, Optional

import numpy as np

from lstm_anomaly_rules.dto.config import BatchConfig, PipelineConfig
from lstm_anomaly_rules.errors import DataError


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; values of ``override`` win."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_config_file(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise DataError(f"config file not found: {path}")
    with open(path) as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return payload


def build_config(flags: Dict[str, Any], config_path: Optional[str] = None) -> PipelineConfig:
    """
    Model defaults, then command-line flags, then the config file
    :param flags: nested dict of the flags that were actually given
    :raises pydantic.ValidationError: invalid combination of values
    """
    values = flags
    if config_path:
        values = merge(flags, read_config_file(config_path))
    return PipelineConfig(**values)


def is_batch(payload: Dict[str, Any]) -> bool:
    return "runs" in payload


def build_batch(config_path: str) -> BatchConfig:
    return BatchConfig(**read_config_file(config_path))


def derive_seeds(seed: int, count: int) -> List[int]:
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]
