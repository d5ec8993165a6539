"""Contact-phased trajectory optimisation."""

from .closure import closure_error, planned_state, rollout
from .planner import (
    AblationRow,
    ablate_contacts,
    ablate_polynomials,
    build_problem,
    constraints,
    cost,
    max_swing_displacement,
    residual_report,
    solution_from_x,
    solve,
)
from .problem import CostWeights, OcpProblem, ProblemError, docked_height
from .solution import OcpSolution, SampledPlan, VectorSpline, load_plan_csv
from .solver import SolverOptions, SolverResult, solve_nlp
from .transcription import Transcription

__all__ = [
    "AblationRow", "CostWeights", "OcpProblem", "OcpSolution", "ProblemError", "SampledPlan",
    "SolverOptions", "SolverResult", "Transcription", "VectorSpline", "ablate_contacts",
    "ablate_polynomials", "build_problem", "closure_error", "constraints", "cost", "docked_height", "load_plan_csv",
    "max_swing_displacement", "planned_state", "residual_report", "rollout", "solution_from_x", "solve",
    "solve_nlp",
]
