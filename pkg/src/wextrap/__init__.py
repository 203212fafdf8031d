"""Vector extrapolation in weighted inner-product spaces.

The package accelerates fixed-point iterations with two polynomial
extrapolation methods, verifies the algebraic identities coupling
them, and exposes the matching weighted Krylov solvers.  Everything
is organized around an incrementally grown weighted QR factorization
of the iterate differences.
"""

from .errors import (
    Breakdown,
    DimensionMismatch,
    InsufficientVectors,
    LambdaNotPositive,
    MpeNonexistent,
    NegativeQuadraticForm,
    NonFiniteIterate,
    NonpositiveWeight,
    NotHermitian,
    NotPositiveDefinite,
    ParseError,
    RankDeficient,
    TheoremViolation,
    WextrapError,
)
from .extrapolate import (
    CoefficientSolve,
    ExtrapolationRecord,
    RunHistory,
    RunStatus,
    assemble,
    history_rows,
    history_to_dict,
    mpe_coefficients,
    residual_estimate,
    rre_coefficients,
    run,
)
from .krylov import (
    KrylovComparison,
    KrylovState,
    arnoldi_step,
    equivalence_check,
    fom_solve,
    gmr_solve,
    initial_state,
)
from .mmio import (
    load_history,
    read_matrix,
    read_sequence,
    read_vector,
    save_history,
    write_matrix,
    write_sequence,
    write_vector,
)
from .problems import (
    FixedPointProblem,
    VectorSequence,
    cosine_problem,
    iterate,
    make_mpe_failure_problem,
    make_mpe_failure_sequence,
    make_near_stagnation_problem,
    quadratic_problem,
    residual,
)
from .qr import (
    DifferenceMatrix,
    WQRFactors,
    append_column,
    empty_factors,
    gs_factorize,
    mgs_factorize,
    orthogonalize_column,
)
from .relations import (
    RelationReport,
    StageRelations,
    check_corollaries,
    check_coupling,
    check_master_identity,
    check_stagnation,
    peak_plateau_report,
    verify_history,
)
from .weights import WeightOperator, validate

__all__ = [
    "Breakdown",
    "CoefficientSolve",
    "DifferenceMatrix",
    "DimensionMismatch",
    "ExtrapolationRecord",
    "FixedPointProblem",
    "InsufficientVectors",
    "KrylovComparison",
    "KrylovState",
    "LambdaNotPositive",
    "MpeNonexistent",
    "NegativeQuadraticForm",
    "NonFiniteIterate",
    "NonpositiveWeight",
    "NotHermitian",
    "NotPositiveDefinite",
    "ParseError",
    "RankDeficient",
    "RelationReport",
    "RunHistory",
    "RunStatus",
    "StageRelations",
    "TheoremViolation",
    "VectorSequence",
    "WQRFactors",
    "WeightOperator",
    "WextrapError",
    "append_column",
    "arnoldi_step",
    "assemble",
    "check_corollaries",
    "check_coupling",
    "check_master_identity",
    "check_stagnation",
    "cosine_problem",
    "empty_factors",
    "equivalence_check",
    "fom_solve",
    "gmr_solve",
    "gs_factorize",
    "history_rows",
    "history_to_dict",
    "initial_state",
    "iterate",
    "load_history",
    "make_mpe_failure_problem",
    "make_mpe_failure_sequence",
    "make_near_stagnation_problem",
    "mgs_factorize",
    "mpe_coefficients",
    "orthogonalize_column",
    "peak_plateau_report",
    "quadratic_problem",
    "read_matrix",
    "read_sequence",
    "read_vector",
    "residual",
    "residual_estimate",
    "rre_coefficients",
    "run",
    "save_history",
    "validate",
    "verify_history",
    "write_matrix",
    "write_sequence",
    "write_vector",
]

__version__ = "0.1.0"
