"""Causal and ICO bounds for causal inequalities, with checkable certificates."""

from .errors import (
    InvalidInstrumentError,
    NotHermitianError,
    NotSingleTriggerError,
    ScenarioMismatchError,
    ShapeError,
    SolverError,
)
from .relaxation import general_ico_upper_bound, membership_all_triggers, membership_necessary
from .scenario import (
    ConditionalDistribution,
    Correlation,
    Scenario,
    algebraic_max,
    biased_lgyni,
    biased_ocb,
    causal_bound_bipartite,
    causal_bound_bruteforce,
    evaluate,
    gyni,
    lgyni,
    ocb,
    ocb_lazy_component,
)
from .single_trigger import ico_bound_single_trigger, single_trigger_operator

__version__ = "0.1.0"

__all__ = [
    "ConditionalDistribution",
    "Correlation",
    "InvalidInstrumentError",
    "NotHermitianError",
    "NotSingleTriggerError",
    "Scenario",
    "ScenarioMismatchError",
    "ShapeError",
    "SolverError",
    "algebraic_max",
    "biased_lgyni",
    "biased_ocb",
    "causal_bound_bipartite",
    "causal_bound_bruteforce",
    "evaluate",
    "general_ico_upper_bound",
    "gyni",
    "ico_bound_single_trigger",
    "lgyni",
    "membership_all_triggers",
    "membership_necessary",
    "ocb",
    "ocb_lazy_component",
    "single_trigger_operator",
]
