"""Exception hierarchy.

Every library error derives from :class:`GrazslideError`. Validation problems
(bad input) and numerical failures are kept apart so the command line can map
them to distinct exit codes.
"""


class GrazslideError(Exception):
    """Base class for all library errors."""


class ValidationError(GrazslideError, ValueError):
    """Input rejected before any computation started."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(GrazslideError, RuntimeError):
    """A computation started but could not produce a trustworthy result."""


class NoSignChange(NumericalError):
    """A root was requested on a bracket without a sign change."""


class MultipleRoots(NumericalError):
    """More than one root where exactly one was required."""


class Diverged(NumericalError):
    """The state left the divergence bound during integration."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class MaxEvents(NumericalError):
    """Too many non-terminal events were recorded."""


class NotSliding(NumericalError):
    """The requested point is not in the sliding region."""


class Trapped(NumericalError):
    """An orbit never reached the requested switching line."""


class OutOfDomain(NumericalError):
    """A section map was evaluated outside its domain."""


class CountNotMonotone(NumericalError):
    """Fixed-point counts do not bracket a single saddle-node."""


class UnattainableTolerance(NumericalError):
    """A requested accuracy could not be reached."""


class NoReturn(NumericalError):
    """An orbit did not come back to the requested section."""


class EvaluationFailed(NumericalError):
    """A map could not be evaluated at a requested point."""


class MarkerNotFound(NumericalError):
    """A geometric marker of the hysteretic map could not be located."""


class WindowEmpty(NumericalError):
    """No integer fits the admissible window."""


class NotConverged(UnattainableTolerance):
    """An extrapolation did not settle within tolerance."""


class NoRoot(NoSignChange):
    """A bracketed root solve found no sign change."""
