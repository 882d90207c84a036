"""Certified lower bounds on asymptotic QKD key rates.

Step 1 minimises the relative-entropy objective over states consistent with
the observations (Frank-Wolfe); Step 2 turns the resulting point into a
verified lower bound through a linearised dual problem.
"""

from .channels import GMap, KrausMap, PinchingChannel, build_gmap
from .constraints import ConstraintSet
from .errors import (CertificateError, ConfigError, ConsistencyError, DimensionError,
                     DomainError, InfeasibleProtocolError, NumericalTroubleError,
                     ParameterError, QKDBoundError, SingularOperandError, ValidationError)
from .objective import ObjectiveContext, eval_f, eval_f_eps, grad_f_eps, zeta
from .sdp import SdpProblem, SdpSolution, Status, restore_dual_feasibility, solve
from .step1 import FeasibleSubspace, FwConfig, build_subspace, find_initial, fw_minimize
from .step2 import (ReliableBound, lower_bound_thm1, lower_bound_thm2, lower_bound_thm3,
                    verify_certificate)

__version__ = "0.1.0"

__all__ = [
    "GMap",
    "KrausMap",
    "PinchingChannel",
    "build_gmap",
    "ConstraintSet",
    "CertificateError",
    "ConfigError",
    "ConsistencyError",
    "DimensionError",
    "DomainError",
    "InfeasibleProtocolError",
    "NumericalTroubleError",
    "ParameterError",
    "QKDBoundError",
    "SingularOperandError",
    "ValidationError",
    "ObjectiveContext",
    "eval_f",
    "eval_f_eps",
    "grad_f_eps",
    "zeta",
    "SdpProblem",
    "SdpSolution",
    "Status",
    "restore_dual_feasibility",
    "solve",
    "FeasibleSubspace",
    "FwConfig",
    "build_subspace",
    "find_initial",
    "fw_minimize",
    "ReliableBound",
    "lower_bound_thm1",
    "lower_bound_thm2",
    "lower_bound_thm3",
    "verify_certificate",
]
