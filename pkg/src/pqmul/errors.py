"""Exception types shared across the toolkit.

The CLI maps these onto exit codes, so user-facing failures should raise one
of the classes below rather than a bare builtin exception.
"""


class PqmulError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PqmulError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class RingMismatchError(PqmulError, ValueError):
    """Operands do not share the same modulus setting."""


class InvalidPlanError(PqmulError, ValueError):
    """A MethodPlan is malformed or unsupported (e.g. Toom with k=7)."""


class InternalArithmeticError(PqmulError, ArithmeticError):
    """An exact integer division left a remainder during interpolation.

    This is always an implementation defect, never a user error.
    """


class CapacityError(PqmulError, RuntimeError):
    """The host does not have enough logical cores for the request."""


class ResourceError(PqmulError, RuntimeError):
    """A worker pool could not be created."""


class TimerResolutionError(PqmulError, RuntimeError):
    """The monotonic clock is too coarse for benchmarking."""


class CalibrationError(PqmulError, ValueError):
    """Benchmark records do not cover the cells calibration needs."""


class CoverageError(PqmulError, LookupError):
    """A (plan, degree) query falls outside the calibrated data."""


class RuleTableError(PqmulError, ValueError):
    """A rule table (in memory or on disk) violates its invariants."""


class ScenarioError(PqmulError, ValueError):
    """A simulation scenario (in memory or on disk) is malformed."""
