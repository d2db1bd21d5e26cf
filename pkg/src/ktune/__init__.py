"""Generic auto-tuner for parameterised compute kernels."""

from .backend import (
    EvaluationRequest,
    EvaluationResult,
    ExternalBackend,
    ReplayBackend,
    Status,
    SyntheticBackend,
    SyntheticModelSpec,
)
from .errors import KtuneError
from .expr import Constraint, evaluate_constraint, parse_constraint
from .kernel import (
    ArgumentSpec,
    DeviceModel,
    DivGlobalSize,
    DivLocalSize,
    KernelSpec,
    MulGlobalSize,
    MulLocalSize,
    device_preset,
)
from .search import StrategySpec, budget, pso_move, run_search, sa_acceptance
from .space import Configuration, SearchSpace
from .tuner import TuningJob, TuningResult, resolve_thread_sizes, run_tuning, verify_outputs

__version__ = "0.1.0"

__all__ = [
    "ArgumentSpec",
    "Configuration",
    "Constraint",
    "DeviceModel",
    "DivGlobalSize",
    "DivLocalSize",
    "EvaluationRequest",
    "EvaluationResult",
    "ExternalBackend",
    "KernelSpec",
    "KtuneError",
    "MulGlobalSize",
    "MulLocalSize",
    "ReplayBackend",
    "SearchSpace",
    "Status",
    "StrategySpec",
    "SyntheticBackend",
    "SyntheticModelSpec",
    "TuningJob",
    "TuningResult",
    "budget",
    "device_preset",
    "evaluate_constraint",
    "parse_constraint",
    "pso_move",
    "resolve_thread_sizes",
    "run_search",
    "run_tuning",
    "sa_acceptance",
    "verify_outputs",
]
