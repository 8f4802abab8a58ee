"""Exception hierarchy shared by every solver.

The CLI maps these to exit codes: Infeasible -> 2, StructuralError -> 3,
RefusedScale -> 4.
"""


class CKMError(Exception):
    """Base class for all package errors."""


class StructuralError(CKMError, ValueError):
    """Malformed input: bad point ids, wrong shapes, disconnected graphs."""


class Infeasible(CKMError):
    """No capacity-respecting solution exists."""

    def __init__(self, message: str, shortfall: int = 0):
        super().__init__(message)
        self.shortfall = shortfall


class RefusedScale(CKMError):
    """An exhaustive routine was asked to run beyond its size guard."""


class InvariantViolation(CKMError, AssertionError):
    """An internal mathematical guarantee did not hold."""
