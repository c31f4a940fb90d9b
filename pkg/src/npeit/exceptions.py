"""Shared exception types.

Errors are split by who can fix them: geometry/configuration errors mean the
input description is unusable, numerical errors mean a solve or an assembled
operator failed a well-posedness check and the discretization (usually the
node count) has to change.
"""

from __future__ import annotations

__all__ = [
    "CurveError",
    "IndeterminatePointError",
    "SeparationError",
    "EvaluationDomainError",
    "ConditioningError",
    "SolverError",
    "ConfigError",
]


class CurveError(ValueError):
    """Curve parameters do not describe a simple closed curve."""


class IndeterminatePointError(ValueError):
    """Point is too close to a discrete curve for a reliable inside test."""


class SeparationError(ValueError):
    """Inclusion boundary is too close to the outer boundary for the
    requested resolution."""


class EvaluationDomainError(ValueError):
    """Field evaluation requested at a point where the quadrature cannot be
    trusted (closer to a source curve than the documented safe distance, or
    outside the domain)."""


class ConditioningError(RuntimeError):
    """An assembled operator failed a definiteness or conditioning check."""


class SolverError(RuntimeError):
    """A linear solve failed or produced an unacceptable residual."""


class ConfigError(ValueError):
    """Experiment configuration is malformed."""
