"""
GSDM.exceptions - Error types raised by the GSDM library

Every error derives from ``GSDMError`` and from the closest builtin, so callers
may catch either ``GSDMError`` or e.g. ``ValueError``.
"""

from typing import Optional


class GSDMError(Exception):
    """Base class for all GSDM errors."""


class PreconditionError(GSDMError, ValueError):
    """An argument violates an operation's precondition (shape, range, emptiness)."""


class ConvergenceError(GSDMError, RuntimeError):
    """
    An iterative solver hit its iteration cap.

    Attributes:
        residual (float): Off-diagonal Frobenius norm when the solver stopped.
        sweeps (int): Number of sweeps performed.
    """

    def __init__(self, message: str, residual: float, sweeps: int):
        super().__init__(f"{message} (residual off-diagonal norm {residual:.3e} after {sweeps} sweeps)")
        self.residual = residual
        self.sweeps = sweeps


class NonFiniteError(GSDMError, FloatingPointError):
    """
    A loss or sampler state became NaN or infinite.

    Attributes:
        step (int): Training step or sampler iteration at which it happened.
        last_checkpoint (str or None): Last checkpoint written before the failure.
    """

    def __init__(self, message: str, step: Optional[int] = None, last_checkpoint: Optional[str] = None):
        detail = message if step is None else f"{message} at step {step}"
        if last_checkpoint:
            detail += f"; last good checkpoint: {last_checkpoint}"
        super().__init__(detail)
        self.step = step
        self.last_checkpoint = last_checkpoint


class FormatError(GSDMError, ValueError):
    """
    A file (dataset, checkpoint, config) could not be parsed.

    Attributes:
        line (int or None): 1-based line number of the offending record, when known.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ArchitectureMismatchError(FormatError):
    """A checkpoint was written for a different network architecture."""


class VerificationError(GSDMError, AssertionError):
    """One or more oracle checks failed."""
