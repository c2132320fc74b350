"""Exception hierarchy shared by all gmt_rect modules."""


class GmtRectError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolationError(GmtRectError):
    """An operation was called with arguments violating its contract."""


class InvalidLandmarkError(ContractViolationError):
    """Landmark points must be pairwise distinct."""


class InconsistentDataError(ContractViolationError):
    """Supplied sample values contradict the declared Lipschitz constant."""


class InsufficientDensityError(GmtRectError):
    """Not enough well-placed neighbors to fit a local derivative."""


class UnsupportedDomainError(GmtRectError):
    """The operation requires a convex (full box) grid domain."""


class UnreliableCheckError(GmtRectError):
    """Too many unresolved points for the check to be meaningful."""


class NeedsPermutationError(GmtRectError):
    """The leading minor is singular; retry with another coordinate choice."""


class StraighteningFailureError(GmtRectError):
    """Newton inversion failed down to the minimum trust radius."""


class CubeTooCoarseError(GmtRectError):
    """Density condition on the cube failed; shrink the cube."""


class NoPathFoundError(GmtRectError):
    """Endpoint penalty could not be driven below tolerance."""

    def __init__(self, message, best_miss=None):
        super().__init__(message)
        self.best_miss = best_miss


class NotHorizontalError(GmtRectError):
    """Vector lies outside the span of the frame at the base point."""


class DegenerateFieldsError(GmtRectError):
    """Vector fields vanish or become dependent somewhere on the domain."""


class UnknownExperimentError(GmtRectError):
    """Experiment id is not registered."""


class ReportSchemaError(GmtRectError):
    """Report payload does not match the expected schema."""
