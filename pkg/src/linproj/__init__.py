"""Batched, factorization-free differentiable projection onto general
linear constraints with box bounds."""

from .backward import (
    AdjointSeed,
    GradientBundle,
    KktOperator,
    backward,
    cg_solve,
    kkt_residual_h,
)
from .canonical import (
    Embedding,
    GeneralConstraints,
    StandardProblem,
    canonicalize,
    recover,
)
from .dual import (
    EntropicProblem,
    SmoothnessConstants,
    dual_gradient,
    dual_objective,
    primal_from_dual,
    primal_objective,
    smoothness_constants,
    stationarity_residual,
)
from .errors import CertifiedInfeasible, ContractViolation, SingularKkt
from .layer import (
    ProjectionLayer,
    ProjectionResult,
    build_layer,
    project,
    project_backward,
)
from .operators import (
    BlockDiagOperator,
    CsrMatrix,
    DenseMatrix,
    LinearOperator,
    block_diag,
    estimate_spectral_norm,
    identity,
)
from .solver import Solution, SolverConfig, Status, residual, solve, solve_batch

__all__ = [
    "AdjointSeed",
    "BlockDiagOperator",
    "CertifiedInfeasible",
    "ContractViolation",
    "CsrMatrix",
    "DenseMatrix",
    "Embedding",
    "EntropicProblem",
    "GeneralConstraints",
    "GradientBundle",
    "KktOperator",
    "LinearOperator",
    "ProjectionLayer",
    "ProjectionResult",
    "SingularKkt",
    "SmoothnessConstants",
    "Solution",
    "SolverConfig",
    "StandardProblem",
    "Status",
    "backward",
    "block_diag",
    "build_layer",
    "canonicalize",
    "cg_solve",
    "dual_gradient",
    "dual_objective",
    "estimate_spectral_norm",
    "identity",
    "kkt_residual_h",
    "primal_from_dual",
    "primal_objective",
    "project",
    "project_backward",
    "recover",
    "residual",
    "smoothness_constants",
    "solve",
    "solve_batch",
    "stationarity_residual",
]

__version__ = "0.1.0"
