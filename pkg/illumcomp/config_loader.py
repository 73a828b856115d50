"""
JSON configuration files and command-line overrides.

A config file holds any subset of a model's fields; missing fields take the
model defaults. Overrides use dotted keys into the nested structure:

    loss_weights.lambda_G=2
    network.encoder_channels=[4,8,16]
    corpus=data/train

Values are parsed as JSON when possible and kept as strings otherwise.

Usage:
    from illumcomp.config_loader import load_config
    from illumcomp.training.config import TrainConfig

    cfg = load_config(TrainConfig, Path("train.json"), ["steps=10"])
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, TypeVar

from pydantic import BaseModel
from pydantic import ValidationError as PydanticValidationError

from illumcomp.utils.errors import ConfigValidationError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def parse_override(item: str) -> Tuple[List[str], Any]:
    """
    Split "a.b.c=value" into (["a", "b", "c"], parsed value).

    Raises:
        ConfigValidationError: When '=' or the key is missing
    """
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key or any(not part for part in key.split(".")):
        raise ConfigValidationError(f"override must look like key=value, got '{item}'", key=key)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted overrides to a nested dict (returns a new dict).

    Every key must already exist in `data`, which should therefore hold the
    full default structure.

    Raises:
        ConfigValidationError: On malformed overrides or unknown keys
    """
    result = copy.deepcopy(data)
    for item in overrides:
        path, value = parse_override(item)
        node = result
        for depth, part in enumerate(path):
            if not isinstance(node, dict) or part not in node:
                raise ConfigValidationError(f"unknown configuration key '{'.'.join(path[:depth + 1])}'",
                                            key=".".join(path))
            if depth == len(path) - 1:
                node[part] = value
            else:
                node = node[part]
        logger.debug(f"override {'.'.join(path)} = {value!r}")
    return result


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Read a JSON object from disk.

    Raises:
        ConfigValidationError: When the file is missing, not JSON or not an object
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigValidationError(f"config file not found: {path}", details={"path": str(path)})
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigValidationError(f"cannot parse config file {path}: {e}", details={"path": str(path)})
    if not isinstance(data, dict):
        raise ConfigValidationError(f"config file {path} must hold a JSON object", details={"path": str(path)})
    return data


def validate_config(model: Type[ModelT], data: Dict[str, Any]) -> ModelT:
    """model.model_validate with pydantic errors wrapped as ConfigValidationError."""
    try:
        return model.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigValidationError(f"invalid {model.__name__}: {first.get('msg')}", key=key,
                                    details={"errors": len(e.errors())})


def load_config(
    model: Type[ModelT],
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    base: Optional[Dict[str, Any]] = None
) -> ModelT:
    """
    Build a config from defaults, an optional JSON file and overrides.

    Args:
        model: pydantic config class (every field must have a default)
        path: JSON file with a subset of the fields
        overrides: "dotted.key=value" strings applied after the file
        base: Starting values instead of the model defaults (e.g. the
            configuration stored in a checkpoint)

    Returns:
        Validated config instance

    Raises:
        ConfigValidationError: Unknown keys, malformed values, unreadable file
    """
    data = model().model_dump(mode="json")
    if base is not None:
        data = _merge(data, base)
    if path is not None:
        file_data = read_config_file(path)
        unknown = sorted(set(file_data) - set(data))
        if unknown:
            raise ConfigValidationError(f"unknown configuration key '{unknown[0]}' in {path}", key=unknown[0])
        data = _merge(data, file_data)
    data = apply_overrides(data, overrides)
    config = validate_config(model, data)
    logger.debug(f"Loaded {model.__name__} from {path or 'defaults'} with {len(overrides)} override(s)")
    return config
