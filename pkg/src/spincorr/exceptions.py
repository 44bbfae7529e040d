"""Exception hierarchy.

``ConfigError`` marks malformed run configurations (CLI exit code 1),
``DomainError`` subclasses mark physically meaningful but unusable inputs
(exit code 2), and ``ToleranceError`` marks a failed internal numerical
self-check (exit code 3).
"""


class SpincorrError(Exception):
    """Base class for all package errors."""


class ConfigError(SpincorrError):
    """Malformed or inconsistent run configuration."""


class DomainError(SpincorrError):
    """Physics-domain error: a valid request that cannot be fulfilled."""


class ConventionError(DomainError):
    """Operator-convention misuse, e.g. Pauli matrices for spin != 1/2."""


class ZeroProbabilityError(DomainError):
    """A measurement branch with (numerically) vanishing probability."""


class EstimatorError(DomainError):
    """Estimator cannot be assembled: zero coupling, degenerate prefactor,
    or an unbalanced ancilla state without an exact reference available."""


class NormalizationError(DomainError):
    """Relative errors are undefined because |C| is numerically zero."""


class TimeOrderError(DomainError):
    """Measurement times are not ordered as required."""


class DegenerateAngleError(DomainError):
    """Rotation angle with sin(theta) = 0 cannot be inverted."""


class ToleranceError(SpincorrError):
    """An internal numerical consistency check failed."""
