"""Configuration resolution.

Values are merged with the precedence command-line flags > ``EWSN_<KEY>``
environment variables > TOML file > built-in defaults, validated against
:data:`CONFIG_SCHEMA` and returned as a :class:`ResolvedConfig`.

A TOML file may use flat keys or the ``[model]``, ``[simulation]`` and
``[numerics]`` tables::

    [model]
    n_sensors = 10
    harvest_rate = 0.03

    [simulation]
    replications = 20000
"""
import os
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import jsonschema

from ewsn_retrieval.errors import ValidationError
from ewsn_retrieval.model import EstimationSpec, ModelParams, required_samples
from ewsn_retrieval.retrieval import RetrievalQuery
from ewsn_retrieval.sim import ArrivalMode, SimConfig
from ewsn_retrieval.utils.structure import dotdict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "EWSN_"

DEFAULTS: Dict[str, Any] = {
    "n_sensors": 10,
    "battery_cap": 4,
    "harvest_rate": 0.2,
    "broadcast_rate": 0.4,
    "client_arrival_rate": None,
    "samples_needed": 2,
    "sigma2": None,
    "threshold": None,
    "replications": 100_000,
    "seed": 20240601,
    "arrival_mode": ArrivalMode.PASTA_INJECT.value,
    "warmup_time": None,
    "rewarm_time": 10.0,
    "replications_per_trajectory": 1000,
    "dimension_cap": 4096,
    "workers": 1,
    "log_level": "INFO",
}

TABLES = {
    "model": (
        "n_sensors", "battery_cap", "harvest_rate", "broadcast_rate",
        "client_arrival_rate", "samples_needed", "sigma2", "threshold",
    ),
    "simulation": (
        "replications", "seed", "arrival_mode", "warmup_time", "rewarm_time",
        "replications_per_trajectory",
    ),
    "numerics": ("dimension_cap", "workers", "log_level"),
}

_POSITIVE_INT = {"type": "integer", "minimum": 1}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_OPTIONAL_POSITIVE = {"type": ["number", "null"], "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_sensors": _POSITIVE_INT,
        "battery_cap": _POSITIVE_INT,
        "harvest_rate": _POSITIVE,
        "broadcast_rate": _POSITIVE,
        "client_arrival_rate": _OPTIONAL_POSITIVE,
        "samples_needed": _POSITIVE_INT,
        "sigma2": _OPTIONAL_POSITIVE,
        "threshold": _OPTIONAL_POSITIVE,
        "replications": _POSITIVE_INT,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "arrival_mode": {"enum": [m.value for m in ArrivalMode]},
        "warmup_time": {"type": ["number", "null"], "minimum": 0},
        "rewarm_time": {"type": "number", "minimum": 0},
        "replications_per_trajectory": _POSITIVE_INT,
        "dimension_cap": _POSITIVE_INT,
        "workers": _POSITIVE_INT,
        "log_level": {"enum": ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]},
    },
}


class ResolvedConfig(dotdict):
    """Merged configuration that also remembers which keys a file, the environment or a flag supplied."""

    def __init__(self, values: Mapping[str, Any], given: Iterable[str] = ()) -> None:
        super().__init__(values)
        object.__setattr__(self, "given", frozenset(given))

    def explicit(self, key: str) -> Optional[Any]:
        """Value of ``key`` if it was set by any layer above the built-in defaults, else None."""
        return self[key] if key in self.given else None


def _coerce(key: str, raw: str) -> Any:
    """Parse an environment string according to the schema type of ``key``."""
    kind = CONFIG_SCHEMA["properties"][key].get("type", "string")
    kinds = kind if isinstance(kind, list) else [kind]
    text = raw.strip()
    if "null" in kinds and text.lower() in ("", "none", "unset"):
        return None
    try:
        if "integer" in kinds:
            return int(text)
        if "number" in kinds:
            return float(text)
    except ValueError:
        raise ValidationError(f"environment variable {ENV_PREFIX}{key.upper()} is not numeric: {raw!r}") from None
    return text.upper() if key == "log_level" else text


def read_toml(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a TOML file and flatten its ``[model]``/``[simulation]``/``[numerics]`` tables."""
    try:
        with open(path, "rb") as fh:
            document = tomllib.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ValidationError(f"config file {path} is not valid TOML: {e}") from e

    flat: Dict[str, Any] = {}
    for key, value in document.items():
        if key in TABLES and isinstance(value, dict):
            for inner, inner_value in value.items():
                if inner not in TABLES[key]:
                    raise ValidationError(f"unknown key {inner!r} in [{key}] of {path}")
                flat[inner] = inner_value
        else:
            flat[key] = value
    return flat


def read_env(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Collect ``EWSN_<KEY>`` overrides for known keys."""
    environ = os.environ if environ is None else environ
    found: Dict[str, Any] = {}
    for key in DEFAULTS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            found[key] = _coerce(key, environ[name])
    return found


def load_config(
    flags: Optional[Mapping[str, Any]] = None,
    config_path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ResolvedConfig:
    """Merge defaults, TOML file, environment and flags into a validated configuration.

    Flags whose value is None are treated as not given.

    Raises:
        ValidationError: unknown keys, wrong types, or only one of sigma2/threshold.
    """
    layers = [read_toml(config_path) if config_path is not None else {}, read_env(environ)]
    layers.append({k: v for k, v in (flags or {}).items() if v is not None})
    merged: Dict[str, Any] = dict(DEFAULTS)
    for layer in layers:
        merged.update(layer)

    try:
        jsonschema.validate(merged, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path) or "config"
        raise ValidationError(f"invalid configuration at {where}: {e.message}") from None

    if (merged["sigma2"] is None) != (merged["threshold"] is None):
        raise ValidationError("sigma2 and threshold must be given together")

    given = {key for layer in layers for key in layer}
    if merged["sigma2"] is not None:
        merged["samples_needed"] = required_samples(EstimationSpec(merged["sigma2"], merged["threshold"]))
        given.add("samples_needed")
    return ResolvedConfig(merged, given)


def model_params(cfg: Mapping[str, Any]) -> ModelParams:
    return ModelParams(
        n_sensors=cfg["n_sensors"],
        battery_cap=cfg["battery_cap"],
        harvest_rate=cfg["harvest_rate"],
        network_broadcast_rate=cfg["broadcast_rate"],
        client_arrival_rate=cfg["client_arrival_rate"],
    )


def retrieval_query(cfg: Mapping[str, Any]) -> RetrievalQuery:
    return RetrievalQuery(model_params(cfg), cfg["samples_needed"])


def sim_config(cfg: Mapping[str, Any]) -> SimConfig:
    return SimConfig(
        params=model_params(cfg),
        samples_needed=cfg["samples_needed"],
        replications=cfg["replications"],
        warmup_time=cfg["warmup_time"],
        seed=cfg["seed"],
        arrival_mode=cfg["arrival_mode"],
        rewarm_time=cfg["rewarm_time"],
        replications_per_trajectory=cfg["replications_per_trajectory"],
        workers=cfg["workers"],
    )
