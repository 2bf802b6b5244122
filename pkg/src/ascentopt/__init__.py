"""Solvers for separable convex minimization under ascending prefix-sum
constraints, plus the Euclidean projection onto that polytope.

The fast path is `run_dual` (a dual breakpoint method that finishes in at
most one outer iteration per breakpoint) and `project` (the same method
specialized to quadratics, with an optional compiled kernel).  `solve_gp`
and `ps_solve` are reference methods used for cross-checking, and
`active_set_oracle` enumerates binding patterns exactly for tiny instances.
"""

from .errors import (
    InfeasibleProblemError,
    InputValidationError,
    NumericalError,
    ProblemFileError,
    SolverError,
    UnsupportedProblemError,
)
from .model import (
    AscendingProblem,
    FeasibilityCheck,
    GeneralObjective,
    KktCertificate,
    LastConstraint,
    ScalarConvexPiece,
    SeparableObjective,
    SolveReport,
    check_feasibility,
    piece_from_functions,
    quadratic_piece,
    unconstrained_minimizers,
)
from .dual import DualConfig, run_dual
from .projection import (
    HAVE_FAST_KERNEL,
    project,
    project_raw,
    quadratic_objective,
)
from .gp import Armijo, DiminishingInvSqrt, FixedStep, GpConfig, gp_step, solve_gp
from .oracles import active_set_oracle, kkt_residual, ps_solve
from .transforms import (
    P2Problem,
    eliminate_equality,
    monotonize_gamma,
    p2_to_p1,
    relax_equality,
)
from .testbed import (
    InstanceSpec,
    gen_tp1,
    gen_tp2,
    gen_tp3,
    instance_to_dict,
    problem_from_dict,
    random_quadratic,
    random_separable,
)

__version__ = "0.1.0"

__all__ = [
    "AscendingProblem",
    "Armijo",
    "DiminishingInvSqrt",
    "DualConfig",
    "FeasibilityCheck",
    "FixedStep",
    "GeneralObjective",
    "GpConfig",
    "HAVE_FAST_KERNEL",
    "InfeasibleProblemError",
    "InputValidationError",
    "InstanceSpec",
    "KktCertificate",
    "LastConstraint",
    "NumericalError",
    "P2Problem",
    "ProblemFileError",
    "ScalarConvexPiece",
    "SeparableObjective",
    "SolveReport",
    "SolverError",
    "UnsupportedProblemError",
    "active_set_oracle",
    "check_feasibility",
    "eliminate_equality",
    "gen_tp1",
    "gen_tp2",
    "gen_tp3",
    "gp_step",
    "instance_to_dict",
    "kkt_residual",
    "monotonize_gamma",
    "p2_to_p1",
    "piece_from_functions",
    "problem_from_dict",
    "project",
    "project_raw",
    "ps_solve",
    "quadratic_objective",
    "quadratic_piece",
    "random_quadratic",
    "random_separable",
    "relax_equality",
    "run_dual",
    "solve_gp",
    "unconstrained_minimizers",
    "__version__",
]
