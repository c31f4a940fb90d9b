"""Boundary-integral toolkit for a two-dimensional conductivity problem
with one inclusion: layer potentials in an energy-compatible normalization,
the spectral decomposition of the boundary flux operator, transmission
solves across a conductivity sweep with their high-contrast limits, and a
reproducible experiment harness.
"""

from .exceptions import (
    ConditioningError,
    ConfigError,
    CurveError,
    EvaluationDomainError,
    IndeterminatePointError,
    SeparationError,
    SolverError,
)

__all__ = [
    "ConditioningError",
    "ConfigError",
    "CurveError",
    "EvaluationDomainError",
    "IndeterminatePointError",
    "SeparationError",
    "SolverError",
    "__version__",
]

__version__ = "0.1.0"
