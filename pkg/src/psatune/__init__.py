"""Budget-aware probe-and-solve hyperparameter tuning for black-box combinatorial solvers."""

from .adapters import AdapterSpec, SolverOutcome, SolverStatus, SolverTask, load_adapter
from .engine import PsaResult, allocate_time, luby, run_psa
from .settings import PsaSettings
from .space import ConfigSpace, Configuration, cardinality, hamming_distance, load_space, neighbors
from .strategies import make_strategy

__all__ = [
    "AdapterSpec",
    "ConfigSpace",
    "Configuration",
    "PsaResult",
    "PsaSettings",
    "SolverOutcome",
    "SolverStatus",
    "SolverTask",
    "allocate_time",
    "cardinality",
    "hamming_distance",
    "load_adapter",
    "load_space",
    "luby",
    "make_strategy",
    "neighbors",
    "run_psa",
]
