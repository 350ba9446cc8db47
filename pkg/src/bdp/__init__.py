"""Birth-death processes with an accessible boundary at infinity.

Scale and speed, boundary classification, resolvents of the minimal and of
all non-minimal processes, approximation schemes, path simulation and
Monte-Carlo convergence experiments.
"""

from .errors import BDPError
from .functions import StateFunction
from .measures import build_measure
from .rates import build_rates, custom, geometric_exit, geometric_regular, linear, table
from .resolvent import (
    SolveControls,
    boundary_residual,
    full_resolvent_field,
    minimal_resolvent_column,
    minimal_solution,
    pi_distribution,
    u_min,
)
from .scale import classify_boundary, scale_speed
from .states import CEMETERY, INFINITY, StatePoint, metric_r
from .triple import ParameterTriple, check_admissible

__version__ = "0.1.0"

__all__ = [
    "BDPError",
    "StateFunction",
    "build_measure",
    "build_rates",
    "custom",
    "geometric_exit",
    "geometric_regular",
    "linear",
    "table",
    "SolveControls",
    "boundary_residual",
    "full_resolvent_field",
    "minimal_resolvent_column",
    "minimal_solution",
    "pi_distribution",
    "u_min",
    "classify_boundary",
    "scale_speed",
    "CEMETERY",
    "INFINITY",
    "StatePoint",
    "metric_r",
    "ParameterTriple",
    "check_admissible",
]
