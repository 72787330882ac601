"""Bounded-rational decision making over finite sequential probability spaces."""
from .conjugate import (
    FreeUtilityReport,
    UtilityVector,
    free_utility,
    measure_from_utility,
    utility_from_measure,
    verify_conjugacy,
)
from .errors import (
    CapacityError,
    DegenerateError,
    ParameterError,
    ValidationError,
    ZeroProbabilityError,
)
from .gvp import GvpProblem, UtilityTable, build_auxiliary, gvp_objective, gvp_solve
from .prob import (
    Alphabet,
    CausalModel,
    DistTable,
    IOType,
    UpdateKind,
    VariableSpec,
    VPMode,
    behavior_from_beliefs,
    condition,
    intervene,
    joint_probability,
    marginal,
    obs,
)
from .transform import (
    TransformProblem,
    control_solution,
    estimation_solution,
    free_utility_difference,
)

__version__ = "0.1.0"
