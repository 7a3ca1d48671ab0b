"""Exception types raised across the toolkit."""


class LamTensorError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(LamTensorError, ValueError):
    """Raised when matrix shapes are inconsistent."""


class ArityError(LamTensorError, ValueError):
    """Raised when a lambda-sequence receives the wrong number of arguments."""


class UnsupportedSequenceError(LamTensorError):
    """Raised when no witness can be produced for a lambda-sequence."""


class InvolutionUnsupportedError(LamTensorError):
    """Raised when the involution is requested for a sequence failing (O1)."""


class RefusedError(LamTensorError):
    """Raised when an operation's precondition on the sequence is not verified."""


class NotCompletelyPositiveError(LamTensorError, ValueError):
    """Raised when a Choi matrix is not positive semidefinite."""


class NotPositiveError(LamTensorError, ValueError):
    """Raised when a matrix that must be PSD is not."""


class NotSelfAdjointError(LamTensorError, ValueError):
    """Raised when a self-adjoint input is required."""


class BudgetError(LamTensorError):
    """Raised when a computation would exceed its enumeration or memory budget."""
