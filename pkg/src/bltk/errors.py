"""Exception hierarchy shared by all bltk modules."""

from __future__ import annotations


class BLTKError(Exception):
    """Base class for every error raised by bltk."""


class ParseError(BLTKError, ValueError):
    """Malformed expression source. ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class DomainError(BLTKError, ArithmeticError):
    """Evaluation at a pole, a branch cut, or outside the floating point range."""

    def __init__(self, message: str, point=None):
        if point is not None:
            message = f"{message} (at z = {complex(point)!r})"
        super().__init__(message)
        self.point = point


class BranchError(DomainError):
    """A square root branch cannot be continued along a path (zero of the radicand)."""


class NonConvergenceError(BLTKError, RuntimeError):
    """An adaptive method ran out of subdivisions, steps or iterations."""


class PathMismatchError(BLTKError, ValueError):
    """Two trajectories that should share a node set do not."""


class PreconditionError(BLTKError, ValueError):
    """Input violates a documented precondition."""
