"""Block quasi-Newton methods for smooth strongly convex minimization.

The package provides the SR-k and randomized block BFGS/DFP estimator updates,
quasi-Newton solvers built on them, logistic and quadratic test objectives,
progress diagnostics and a small benchmark harness.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    Diverged,
    EmptyDataset,
    EstimatorBreakdown,
    FactorDrift,
    InsufficientData,
    MissingResidualDiag,
    NonConvergence,
    NonFinite,
    NotPositiveDefinite,
    ParseError,
    SingularBlock,
    SrkError,
)
from .objectives import LogisticProblem, QuadraticProblem, logistic_constants, random_quadratic
from .solvers import InverseMode, IterationRecord, Method, SolverConfig, iterate, run
from .updates import (
    Strategy,
    StrategyKind,
    block_bfgs,
    block_bfgs_inverse,
    block_dfp,
    pick_directions,
    sigma,
    sr_k,
    tau,
    update_l,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "Diverged",
    "EmptyDataset",
    "EstimatorBreakdown",
    "FactorDrift",
    "InsufficientData",
    "InverseMode",
    "IterationRecord",
    "LogisticProblem",
    "Method",
    "MissingResidualDiag",
    "NonConvergence",
    "NonFinite",
    "NotPositiveDefinite",
    "ParseError",
    "QuadraticProblem",
    "SingularBlock",
    "SolverConfig",
    "SrkError",
    "Strategy",
    "StrategyKind",
    "block_bfgs",
    "block_bfgs_inverse",
    "block_dfp",
    "iterate",
    "logistic_constants",
    "pick_directions",
    "random_quadratic",
    "run",
    "sigma",
    "sr_k",
    "tau",
    "update_l",
]
