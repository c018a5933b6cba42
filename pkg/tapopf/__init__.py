"""AC power flow and optimal power flow with adjustable transformer taps."""
from .case_model import Case, CaseError, CaseSyntaxError, InternalModel, load_case, parse_case, to_internal, validate_case
from .opf_solver import OpfProblem, SolveResult, SolveStatus, newton_power_flow, solve_opf

__all__ = [
    "Case",
    "CaseError",
    "CaseSyntaxError",
    "InternalModel",
    "OpfProblem",
    "SolveResult",
    "SolveStatus",
    "load_case",
    "newton_power_flow",
    "parse_case",
    "solve_opf",
    "to_internal",
    "validate_case",
]
