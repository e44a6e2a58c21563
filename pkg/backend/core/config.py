"""
Run configuration files.

A run configuration is a flat ``KEY=value`` file in ``.env`` syntax. It is parsed
with django-environ into an isolated mapping (the process environment is never
touched), then resolved onto a frozen dataclass: explicit CLI flag > file value >
dataclass default. The fully resolved configuration is written back next to the
outputs in the same syntax so it can be replayed with ``--config``.
"""

import dataclasses
import logging
import types
from collections.abc import Mapping
from enum import Enum
from pathlib import Path
from typing import Any, TypeVar, Union, get_args, get_origin, get_type_hints

import environ

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

C = TypeVar("C")

RESOLVED_CONFIG_NAME = "config.env"


def read_config_file(path: Path | str) -> dict[str, str]:
    """Parse a KEY=value file into a plain dict without touching ``os.environ``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}", path=str(path))

    scoped = type("_RunConfigEnv", (environ.Env,), {"ENVIRON": {}})
    scoped.read_env(str(path), overwrite=True)
    return {key: str(value) for key, value in scoped.ENVIRON.items()}


def _unwrap_optional(annotation: Any) -> tuple[Any, bool]:
    origin = get_origin(annotation)
    if origin in (Union, types.UnionType):
        args = [arg for arg in get_args(annotation) if arg is not type(None)]
        if len(args) == 1:
            return args[0], True
    return annotation, False


def _cast(env: environ.Env, key: str, annotation: Any) -> Any:
    annotation, optional = _unwrap_optional(annotation)
    raw = env.str(key)
    if optional and raw == "":
        return None

    origin = get_origin(annotation)
    try:
        if annotation is bool:
            return env.bool(key)
        if annotation is int:
            return env.int(key)
        if annotation is float:
            return env.float(key)
        if annotation is Path:
            return Path(raw)
        if isinstance(annotation, type) and issubclass(annotation, Enum):
            return annotation(raw)
        if origin is tuple:
            item_type = get_args(annotation)[0]
            return tuple(env.list(key, cast=item_type)) if raw else ()
        return raw
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(
            f"Cannot read {key}={raw!r} as {annotation}", key=key, value=raw
        ) from exc


def resolve_config(
    config_cls: type[C],
    file_values: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> C:
    """
    Build ``config_cls`` from a config file mapping and CLI overrides.

    Args:
        config_cls: A dataclass type; field ``foo_bar`` is read from key ``FOO_BAR``
        file_values: Parsed config file (see ``read_config_file``)
        overrides: CLI options; ``None`` values mean "not given"

    Returns:
        The resolved dataclass instance (its ``__post_init__`` validates)
    """
    if not dataclasses.is_dataclass(config_cls):
        raise TypeError(f"{config_cls!r} is not a dataclass")

    file_values = dict(file_values or {})
    overrides = overrides or {}
    env = environ.Env()
    env.ENVIRON = file_values

    hints = get_type_hints(config_cls)
    known = {field.name.upper() for field in dataclasses.fields(config_cls)}
    unknown = sorted(set(file_values) - known)
    if unknown:
        logger.warning(f"Ignoring unknown config keys: {', '.join(unknown)}")

    values: dict[str, Any] = {}
    for field in dataclasses.fields(config_cls):
        if not field.init:
            continue
        key = field.name.upper()
        if overrides.get(field.name) is not None:
            value = overrides[field.name]
            annotation, _ = _unwrap_optional(hints[field.name])
            if get_origin(annotation) is tuple and isinstance(value, list):
                value = tuple(value)
            values[field.name] = value
        elif key in file_values:
            values[field.name] = _cast(env, key, hints[field.name])

    try:
        return config_cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, tuple | list):
        return ",".join(_format_value(item) for item in value)
    return str(value)


def config_to_dict(config: Any) -> dict[str, Any]:
    """JSON-friendly view of a resolved config dataclass."""
    result: dict[str, Any] = {}
    for field in dataclasses.fields(config):
        value = getattr(config, field.name)
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        result[field.name] = value
    return result


def write_config_file(config: Any, directory: Path | str) -> Path:
    """Write the resolved config as ``config.env`` (sorted keys) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{field.name.upper()}={_format_value(getattr(config, field.name))}"
        for field in sorted(dataclasses.fields(config), key=lambda f: f.name)
    ]
    path = directory / RESOLVED_CONFIG_NAME
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def log_resolved(config: Any, name: str) -> None:
    """Log every resolved value at INFO."""
    for key, value in config_to_dict(config).items():
        logger.info(f"{name}: {key}={value}")
