"""Document validation and runtime settings for spin_control."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import colorlog
import voluptuous as vol
import yaml

from .const import DEFAULT_QUALITY, LOGGER
from .errors import SpinNetworkValidationError

if TYPE_CHECKING:
    from collections.abc import Mapping

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "configuration.yaml"

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


def _finite(value: Any) -> float:
    """Coerce to a finite float."""
    number = vol.Coerce(float)(value)
    if not math.isfinite(number):
        msg = "expected a finite number"
        raise vol.Invalid(msg)
    return number


def _spin_index(value: Any) -> int:
    """Accept integers only, rejecting bools and integral floats."""
    if isinstance(value, bool) or not isinstance(value, int):
        msg = "expected an integer spin index"
        raise vol.Invalid(msg)
    return value


EDGE_SCHEMA = vol.All(
    vol.ExactSequence([_spin_index, _spin_index, _finite]),
    vol.Coerce(tuple),
)

NETWORK_SCHEMA = vol.Schema(
    {
        vol.Required("n"): vol.All(_spin_index, vol.Range(min=1)),
        vol.Optional("drift_edges", default=list): [EDGE_SCHEMA],
        vol.Optional("control_edges", default=list): [EDGE_SCHEMA],
        vol.Optional("name"): str,
    }
)

_ROW = [vol.Any(_finite, vol.ExactSequence([_finite, _finite]))]

HAMILTONIAN_SCHEMA = vol.Schema(
    {
        vol.Required("kind"): "hamiltonians",
        vol.Required("matrices"): vol.All([[_ROW]], vol.Length(min=1)),
        vol.Optional("names", default=list): [str],
        vol.Optional("name"): str,
    }
)

TARGET_MAP_SCHEMA = vol.Schema(
    {
        vol.Match(r"^(0|\d+(,\d+)*)$"): vol.Any(
            _finite, vol.ExactSequence([_finite, _finite])
        )
    }
)

LOGGER_SCHEMA = vol.Schema(
    {
        vol.Optional("default", default="info"): vol.All(str, vol.Lower),
        vol.Optional("logs", default=dict): {str: vol.All(str, vol.Lower)},
    }
)

DEFAULTS_SCHEMA = vol.Schema(
    {
        vol.Optional("quality", default=DEFAULT_QUALITY): vol.All(
            _finite, vol.Range(min=0, min_included=False)
        ),
        vol.Optional("epsilon", default=0.01): vol.All(_finite, vol.Range(min=0)),
        vol.Optional("T", default=5000.0): vol.All(
            _finite, vol.Range(min=0, min_included=False)
        ),
        vol.Optional("dt", default=0.1): vol.All(
            _finite, vol.Range(min=0, min_included=False)
        ),
        vol.Optional("shots"): vol.Any(None, vol.All(int, vol.Range(min=1))),
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional("logger", default=dict): LOGGER_SCHEMA,
        vol.Optional("spin_control", default=dict): DEFAULTS_SCHEMA,
    },
    extra=vol.REMOVE_EXTRA,
)


def _path_of(error: vol.Invalid) -> str:
    """Render a voluptuous error path the way edges are named elsewhere."""
    parts: list[str] = []
    for key in error.path:
        if isinstance(key, int):
            parts.append(f"[{key}]")
        else:
            parts.append(f".{key}" if parts else str(key))
    return "".join(parts) or "<document>"


def validate(schema: vol.Schema, document: Any) -> Any:
    """Run a schema and translate failures to SpinNetworkValidationError."""
    try:
        return schema(document)
    except vol.MultipleInvalid as exception:
        first = exception.errors[0]
        where = _path_of(first)
        msg = f"{where}: {first.msg}"
        raise SpinNetworkValidationError(msg, field=where) from exception
    except vol.Invalid as exception:
        where = _path_of(exception)
        msg = f"{where}: {exception.msg}"
        raise SpinNetworkValidationError(msg, field=where) from exception


@dataclass(frozen=True)
class Settings:
    """Defaults for the command line, read from configuration.yaml."""

    quality: float = DEFAULT_QUALITY
    epsilon: float = 0.01
    T: float = 5000.0  # noqa: N815
    dt: float = 0.1
    shots: int | None = None
    log_default: str = "info"
    log_levels: dict[str, str] = field(default_factory=dict)


def load_config(path: str | Path | None = None) -> Settings:
    """
    Load settings from a YAML file.

    A missing default file yields built-in settings; a missing explicit
    path is a validation error.
    """
    target = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    if not target.exists():
        if path is not None:
            msg = f"config file {target} not found"
            raise SpinNetworkValidationError(msg, field="--config", reason="missing_file")
        LOGGER.debug("No configuration at %s, using defaults", target)
        return Settings()
    try:
        raw = yaml.safe_load(target.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exception:
        msg = f"config file {target} is not valid YAML"
        raise SpinNetworkValidationError(msg, field="--config") from exception
    document = validate(CONFIG_SCHEMA, raw)
    defaults: Mapping[str, Any] = document["spin_control"]
    logger = document["logger"]
    return Settings(
        quality=defaults["quality"],
        epsilon=defaults["epsilon"],
        T=defaults["T"],
        dt=defaults["dt"],
        shots=defaults.get("shots"),
        log_default=logger["default"],
        log_levels=dict(logger["logs"]),
    )


def setup_logging(settings: Settings, *, verbose: bool = False) -> None:
    """Attach a colour stream handler to the package logger."""
    root = LOGGER
    if not any(getattr(h, "_spin_control", False) for h in root.handlers):
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
        handler._spin_control = True  # type: ignore[attr-defined]  # noqa: SLF001
        root.addHandler(handler)
        root.propagate = False
    level = settings.log_levels.get(root.name, settings.log_default)
    root.setLevel(logging.DEBUG if verbose else level.upper())
    for name, value in settings.log_levels.items():
        if name != root.name:
            logging.getLogger(name).setLevel(value.upper())
