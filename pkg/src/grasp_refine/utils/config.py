"""Configuration management for grasp-refine."""

import json
import os
from pathlib import Path
from typing import Any, Iterable, Optional

from pydantic import ValidationError

from ..domain.config import PipelineConfig
from ..domain.exceptions import MissingAsset, SceneParseError


def get_thread_count() -> int:
    """Get the worker count cap from environment or default.

    Returns:
        Value of GRASP_REFINE_THREADS when it is a positive integer, else the CPU count
    """
    raw = os.getenv('GRASP_REFINE_THREADS', '').strip()
    default = os.cpu_count() or 1
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return value if value > 0 else default


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _validation_field(error: ValidationError) -> str:
    first = error.errors()[0]
    return ".".join(str(part) for part in first.get("loc", ())) or "config"


def load_pipeline_config(path: Optional[Path] = None) -> PipelineConfig:
    """Load a pipeline configuration from a JSON file, or the defaults.

    Args:
        path: Optional JSON file with any subset of the config sections

    Returns:
        Validated pipeline configuration
    """
    if path is None:
        return PipelineConfig()

    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingAsset(str(path))
    except json.JSONDecodeError as e:
        raise SceneParseError("config", str(e))

    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise SceneParseError(_validation_field(e), e.errors()[0].get("msg"))


def apply_overrides(config: PipelineConfig, overrides: Iterable[str]) -> PipelineConfig:
    """Apply `section.field=value` overrides to a configuration.

    Args:
        config: Base configuration
        overrides: Strings of the form `section.field=value`; values parse as JSON when possible

    Returns:
        New validated configuration

    Raises:
        SceneParseError: If a key is malformed, unknown, or the value fails validation
    """
    data = config.model_dump()

    for item in overrides:
        if "=" not in item:
            raise SceneParseError(item, "override must look like section.field=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2 or parts[0] not in data or parts[1] not in data[parts[0]]:
            raise SceneParseError(key, "unknown configuration key")
        data[parts[0]][parts[1]] = _parse_value(raw.strip())

    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise SceneParseError(_validation_field(e), e.errors()[0].get("msg"))
