"""Front-fixing solvers for 1-D free boundary problems with a non-diffusing species."""

from .bounds import BoundInputs, BoundReport, bound_inputs, check_solution, majorant_ode, speed_caps, static_caps
from .direct import direct_run
from .fixedpoint import build_ledger, continue_solution, iterate_to_fixed_point
from .grid import FrontState, ReferenceGrid, map_to_physical, map_to_reference
from .model import (InitialData, ModelError, ProblemSpec, ReactionPair, builtin_catalog, cosine_data,
                    parabola_data, validate_initial_data)
from .parabolic import StepParams, solve_subproblem
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "BoundReport", "FrontState", "InitialData", "ModelError", "ProblemSpec",
    "ReactionPair", "ReferenceGrid", "StepParams", "Trajectory", "bound_inputs", "build_ledger",
    "builtin_catalog", "check_solution", "continue_solution", "cosine_data", "direct_run",
    "iterate_to_fixed_point", "majorant_ode", "map_to_physical", "map_to_reference",
    "parabola_data", "solve_subproblem", "speed_caps", "static_caps", "validate_initial_data",
]
