"""
ewsn-retrieval: retrieval time of s distinct measurements from an
energy-harvesting wireless sensor network.
"""

try:
    from ._version import __version__
except ImportError:
    __version__ = "0.0.0"

from ewsn_retrieval.errors import (
    CapacityError,
    DimensionError,
    EwsnError,
    NumericError,
    OutputError,
    ValidationError,
)
from ewsn_retrieval.model import EstimationSpec, ModelParams, SteadyState, SurvivalForm
from ewsn_retrieval.phtype import PhaseType
from ewsn_retrieval.retrieval import RetrievalQuery, expected_time
from ewsn_retrieval.sim import ArrivalMode, SimConfig, SimResult, simulate

__all__ = [
    "ArrivalMode",
    "CapacityError",
    "DimensionError",
    "EstimationSpec",
    "EwsnError",
    "ModelParams",
    "NumericError",
    "OutputError",
    "PhaseType",
    "RetrievalQuery",
    "SimConfig",
    "SimResult",
    "SteadyState",
    "SurvivalForm",
    "ValidationError",
    "expected_time",
    "simulate",
    "__version__",
]
