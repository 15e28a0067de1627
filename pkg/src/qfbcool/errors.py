"""Exception hierarchy for qfbcool.

Validation failures derive from :class:`ValidationError` (a ``ValueError``);
numerical breakdowns during integration derive from :class:`SimulationError`.
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""


class ValidationError(ValueError):
    """Input does not satisfy a documented invariant."""


class DimensionMismatch(ValidationError):
    pass


class InvalidDimension(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class TraceNotOne(ValidationError):
    pass


class NotPositive(ValidationError):
    pass


class SingleEigenvalue(ValidationError):
    """Operator has fewer than two distinct eigenvalues; no spectral gap exists."""


class DomainError(ValidationError):
    pass


class InvalidGamma(ValidationError):
    pass


class AssumptionViolation(ValidationError):
    """A model failed one of the structural checks required before simulation."""


class ConfigError(ValidationError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class SimulationError(RuntimeError):
    pass


class DegenerateNormalization(SimulationError):
    """Kraus update produced a (near) zero-trace state; dt is too large."""


class StepTooLarge(SimulationError):
    pass


class ControllerFault(SimulationError):
    pass
