"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and argument problems
(ValidationError, DomainError and subclasses) exit with 2, numerical
failures (NumericalError and subclasses) with 3, and I/O problems with 4.
"""


class PoroscatError(Exception):
    """Base class for all package errors."""


class DomainError(PoroscatError):
    """An argument lies outside the admissible domain of an operation."""


class GeometryError(DomainError):
    """Degenerate or inconsistent geometric input."""


class SingularityError(DomainError):
    """Kernel evaluation requested at (or too close to) a singular point."""


class DegenerateContactError(DomainError):
    """Contact-law parameters make the interface closure singular."""


class ValidationError(PoroscatError):
    """A scenario or file failed schema validation."""


class CompatibilityError(ValidationError):
    """Artifacts that must match (matrix vs. scene grid) do not."""


class NumericalError(PoroscatError):
    """A numerical procedure failed or produced an unusable result."""


class ConditioningError(NumericalError):
    """A linear solve was abandoned due to bad conditioning."""

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class DispersionDegeneracyError(NumericalError):
    """The two compressional roots coincide; modal splitting is undefined."""
