"""Numerical lab for weighted Hardy and Friedrichs inequalities.

The domain is a rectangle whose left side alternates between pieces where
functions vanish and free pieces.  The package evaluates both sides of the
inequalities on seeded test fields and estimates their sharp discrete
constants.
"""

from .errors import (
    AssemblyError,
    ConfigurationError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    GenerationError,
    HardyLabError,
    PreconditionError,
    QuadratureError,
    ResolutionError,
    SizeGuardError,
)
from .field import Grid, ScalarField, VectorField, generate_test_function, gradient, integrate_weighted
from .geometry import GeometryConfig, build_partition, distances
from .ineq import (
    QuotientKind,
    WeightSpec,
    friedrichs_quotient,
    hardy_quotient,
    lemma_checks,
    mazya_B,
    paper_constants,
    pointwise_ratio,
)
from .maxop import RadiusSchedule, ball_average, hl_ratio, maximal_fn, riesz_potential
from .oracle import oracle_sharp
from .sharp import ConstantEstimate, estimate_sharp

__version__ = "0.1.0"


__all__ = [
    "AssemblyError",
    "ConfigurationError",
    "ConvergenceError",
    "DegenerateInputError",
    "DomainError",
    "GenerationError",
    "HardyLabError",
    "PreconditionError",
    "QuadratureError",
    "ResolutionError",
    "SizeGuardError",
    "Grid",
    "ScalarField",
    "VectorField",
    "generate_test_function",
    "gradient",
    "integrate_weighted",
    "GeometryConfig",
    "build_partition",
    "distances",
    "QuotientKind",
    "WeightSpec",
    "friedrichs_quotient",
    "hardy_quotient",
    "lemma_checks",
    "mazya_B",
    "paper_constants",
    "pointwise_ratio",
    "RadiusSchedule",
    "ball_average",
    "hl_ratio",
    "maximal_fn",
    "riesz_potential",
    "oracle_sharp",
    "ConstantEstimate",
    "estimate_sharp",
]
