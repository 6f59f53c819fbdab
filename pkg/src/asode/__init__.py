"""Additive six-stage third-order L-stable solver for stiff ODEs."""

from .analysis import (
    embedded_step_factor,
    eval_R,
    eval_R2,
    stability_region_scan,
)
from .coefficients import (
    DEFAULT_A,
    EmbeddedCoefficients,
    QuarticRoots,
    ResidualReport,
    SchemeCoefficients,
    derive_embedded,
    derive_scheme,
    solve_design_quartic,
    verify_embedded_conditions,
    verify_order_conditions,
)
from .exceptions import (
    DegenerateParameter,
    DimensionMismatch,
    MaxRejectsExceeded,
    NonFiniteState,
    PoleProximity,
    ReferenceUnavailable,
    SingularMatrix,
    SolverError,
    StepsizeUnderflow,
    UnknownProblem,
    ZeroToleranceDenominator,
)
from .linalg import DenseMatrix, DiagonalMatrix, factor, solve
from .problems import (
    BUILTIN_NAMES,
    SplitProblem,
    Tolerances,
    builtin,
    make_split,
)
from .reference_rk import (
    FEHLBERG45,
    MERSON,
    TABLEAUS,
    ExplicitTableau,
    rk_integrate,
    rk_step,
)
from .stepper import (
    ControllerConfig,
    IntegrationResult,
    RunStatistics,
    embedded_difference,
    error_norm,
    integrate,
    integrate_fixed,
    stability_estimate,
)

__all__ = [
    "BUILTIN_NAMES",
    "ControllerConfig",
    "DEFAULT_A",
    "DegenerateParameter",
    "DenseMatrix",
    "DiagonalMatrix",
    "DimensionMismatch",
    "EmbeddedCoefficients",
    "ExplicitTableau",
    "FEHLBERG45",
    "IntegrationResult",
    "MERSON",
    "MaxRejectsExceeded",
    "NonFiniteState",
    "PoleProximity",
    "QuarticRoots",
    "ReferenceUnavailable",
    "ResidualReport",
    "RunStatistics",
    "SchemeCoefficients",
    "SingularMatrix",
    "SolverError",
    "SplitProblem",
    "StepsizeUnderflow",
    "TABLEAUS",
    "Tolerances",
    "UnknownProblem",
    "ZeroToleranceDenominator",
    "builtin",
    "derive_embedded",
    "derive_scheme",
    "embedded_difference",
    "embedded_step_factor",
    "error_norm",
    "eval_R",
    "eval_R2",
    "factor",
    "integrate",
    "integrate_fixed",
    "make_split",
    "rk_integrate",
    "rk_step",
    "solve",
    "solve_design_quartic",
    "stability_estimate",
    "stability_region_scan",
    "verify_embedded_conditions",
    "verify_order_conditions",
]
