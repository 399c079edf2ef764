"""Parameter sweeps of E[W_s] and their CSV output.

A sweep varies one parameter over increasing values while the others stay
at a base point. Presets cover three standard axes: ``fig2`` and ``fig3``
vary N at a fast and a slow harvest rate, ``fig4`` varies B for several
harvest rates.
"""
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ewsn_retrieval import phtype
from ewsn_retrieval.errors import CapacityError, ValidationError
from ewsn_retrieval.model import ModelParams
from ewsn_retrieval.retrieval import (
    RetrievalQuery,
    expected_time_closed_form,
    expected_time_matrix,
    expected_time_quadrature,
)
from ewsn_retrieval.sim import SimConfig, simulate
from ewsn_retrieval.utils.file_utils import frame_to_csv, write_text
from ewsn_retrieval.utils.log import logger
from ewsn_retrieval.utils.thread import ThreadPool

SWEEP_PARAMS = ("n_sensors", "battery_cap", "harvest_rate", "broadcast_rate", "samples_needed")
SWEEP_METHODS = ("closed_form", "quadrature", "matrix", "simulate")
PRESETS = ("fig2", "fig3", "fig4")

CSV_COLUMNS = (
    "series", "param", "param_value",
    "ew_closed_form", "ew_quadrature", "ew_matrix",
    "ew_sim_mean", "ew_sim_ci_low", "ew_sim_ci_high",
    "n_reps", "seed",
)
CSV_FLOAT_FORMAT = "%.12g"

_INTEGER_PARAMS = ("n_sensors", "battery_cap", "samples_needed")
_PARAM_FIELD = {"broadcast_rate": "network_broadcast_rate"}

PRESET_MU = 0.4
PRESET_S = 2
PRESET_N_VALUES = tuple(range(2, 51))
PRESET_B_VALUES = tuple(range(1, 21))
PRESET_B_SERIES = (1, 2, 5, 10)
PRESET_HARVEST_SERIES = (0.02, 0.03, 0.1, 0.2)
PRESET_FIG4_N = 10


@dataclass(frozen=True)
class SweepSpec:
    """One curve: ``swept_param`` over ``values`` with everything else fixed at ``base``.

    ``simulation`` supplies the replication settings when ``simulate`` is
    among the methods; its params and s are replaced at each point.
    """

    swept_param: str
    values: Tuple[float, ...]
    base: ModelParams
    samples_needed: int
    methods: Tuple[str, ...] = ("closed_form",)
    series: str = "custom"
    dimension_cap: int = phtype.DEFAULT_DIMENSION_CAP
    simulation: Optional[SimConfig] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.swept_param not in SWEEP_PARAMS:
            raise ValidationError(f"cannot sweep {self.swept_param!r}; expected one of {', '.join(SWEEP_PARAMS)}")
        if not self.values:
            raise ValidationError("sweep values must not be empty")
        if any(b <= a for a, b in zip(self.values[:-1], self.values[1:])):
            raise ValidationError(f"sweep values must be strictly increasing, got {list(self.values)}")
        if self.swept_param in _INTEGER_PARAMS and any(int(v) != v for v in self.values):
            raise ValidationError(f"{self.swept_param} takes integer values, got {list(self.values)}")
        if not self.methods:
            raise ValidationError("at least one sweep method is required")
        unknown = [m for m in self.methods if m not in SWEEP_METHODS]
        if unknown:
            raise ValidationError(f"unknown sweep methods {unknown}; expected a subset of {', '.join(SWEEP_METHODS)}")
        if "simulate" in self.methods and self.simulation is None:
            raise ValidationError("the simulate method needs simulation settings")
        if "matrix" in self.methods:
            largest = self.largest_n()
            if 2**largest > self.dimension_cap:
                raise CapacityError(2**largest, self.dimension_cap)

    def largest_n(self) -> int:
        if self.swept_param == "n_sensors":
            return int(max(self.values))
        return self.base.n_sensors

    def query(self, value: float) -> RetrievalQuery:
        """Retrieval query at one point of the curve."""
        if self.swept_param in _INTEGER_PARAMS:
            value = int(value)
        if self.swept_param == "samples_needed":
            return RetrievalQuery(self.base, value)
        params = replace(self.base, **{_PARAM_FIELD.get(self.swept_param, self.swept_param): value})
        return RetrievalQuery(params, self.samples_needed)


@dataclass(frozen=True)
class SweepRow:
    series: str
    param: str
    param_value: float
    ew_closed_form: Optional[float] = None
    ew_quadrature: Optional[float] = None
    ew_matrix: Optional[float] = None
    ew_sim_mean: Optional[float] = None
    ew_sim_ci_low: Optional[float] = None
    ew_sim_ci_high: Optional[float] = None
    n_reps: Optional[int] = None
    seed: Optional[int] = None

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def evaluate_point(spec: SweepSpec, value: float) -> SweepRow:
    """Evaluate every requested method at one sweep value."""
    q = spec.query(value)
    columns: Dict[str, Any] = {}
    if "closed_form" in spec.methods:
        columns["ew_closed_form"] = expected_time_closed_form(q)
    if "quadrature" in spec.methods:
        columns["ew_quadrature"] = expected_time_quadrature(q)
    if "matrix" in spec.methods:
        columns["ew_matrix"] = expected_time_matrix(q, cap=spec.dimension_cap)
    if "simulate" in spec.methods:
        config = replace(spec.simulation, params=q.params, samples_needed=q.samples_needed, workers=1)
        result = simulate(config)
        columns.update(
            ew_sim_mean=result.mean,
            ew_sim_ci_low=result.ci_low,
            ew_sim_ci_high=result.ci_high,
            n_reps=result.replications,
            seed=result.seed_used,
        )

    param_value = int(value) if spec.swept_param in _INTEGER_PARAMS else float(value)
    row = SweepRow(series=spec.series, param=spec.swept_param, param_value=param_value, **columns)
    logger.debug(
        f"{spec.series} {spec.swept_param}={param_value}",
        kind="sweep_point",
        data={
            "series": spec.series,
            "param": spec.swept_param,
            "value": param_value,
            "ew_closed_form": row.ew_closed_form,
            "ew_quadrature": row.ew_quadrature,
            "ew_matrix": row.ew_matrix,
        },
    )
    return row


def run_sweep(specs: Sequence[SweepSpec], workers: int = 1) -> List[SweepRow]:
    """Evaluate all points of all curves concurrently; rows keep curve then value order."""
    items = [{"spec": spec, "value": value} for spec in specs for value in spec.values]
    return ThreadPool(workers).execute(func=evaluate_point, items=items)


def rows_to_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.as_dict() for row in rows], columns=list(CSV_COLUMNS))
    for column in ("n_reps", "seed"):
        frame[column] = frame[column].astype("Int64")
    return frame


def to_csv(rows: Sequence[SweepRow]) -> str:
    """CSV text with a header row and 12 significant digits."""
    return frame_to_csv(rows_to_frame(rows), CSV_FLOAT_FORMAT)


def write_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    return write_text(path, to_csv(rows))


def _format_rate(rate: float) -> str:
    return f"{rate:g}"


def preset(
    name: str,
    battery_cap: Optional[int] = None,
    methods: Sequence[str] = ("closed_form",),
    simulation: Optional[SimConfig] = None,
    dimension_cap: int = phtype.DEFAULT_DIMENSION_CAP,
) -> List[SweepSpec]:
    """Curves of a named preset.

    ``fig2``/``fig3`` draw one curve per B in (1, 2, 5, 10) unless
    ``battery_cap`` fixes a single B.
    """
    common = {
        "samples_needed": PRESET_S,
        "methods": tuple(methods),
        "simulation": simulation,
        "dimension_cap": dimension_cap,
    }
    if name in ("fig2", "fig3"):
        harvest = 0.2 if name == "fig2" else 0.03
        caps = PRESET_B_SERIES if battery_cap is None else (battery_cap,)
        return [
            SweepSpec(
                swept_param="n_sensors",
                values=PRESET_N_VALUES,
                base=ModelParams(PRESET_N_VALUES[0], b, harvest, PRESET_MU),
                series=f"B={b}",
                **common,
            )
            for b in caps
        ]
    if name == "fig4":
        return [
            SweepSpec(
                swept_param="battery_cap",
                values=PRESET_B_VALUES,
                base=ModelParams(PRESET_FIG4_N, PRESET_B_VALUES[0], harvest, PRESET_MU),
                series=f"lambda_e={_format_rate(harvest)}",
                **common,
            )
            for harvest in PRESET_HARVEST_SERIES
        ]
    raise ValidationError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def parse_values(text: str) -> Tuple[float, ...]:
    """Parse ``"2,4,8"`` or an inclusive range ``"start:stop[:step]"``."""
    text = text.strip()
    try:
        parts = [float(p) for p in text.split(":" if ":" in text else ",") if p.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse sweep values {text!r}") from None

    if ":" in text:
        if len(parts) not in (2, 3):
            raise ValidationError(f"a range needs start:stop[:step], got {text!r}")
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) == 3 else 1.0
        if step <= 0:
            raise ValidationError(f"range step must be positive, got {step}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        parts = [start + i * step for i in range(max(count, 0))]
    return tuple(int(v) if v.is_integer() else v for v in parts)
