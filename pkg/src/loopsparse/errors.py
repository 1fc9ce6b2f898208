"""Exception types raised across the package."""


class LoopSparseError(Exception):
    """Base class for all loopsparse errors."""


class ZeroVector(LoopSparseError):
    """A vector that must be normalizable has zero norm."""


class BadDimensions(LoopSparseError):
    """Requested dimensions are invalid for the given input."""


class DimensionMismatch(LoopSparseError):
    """Two objects that must share a dimension do not."""


class EmptyInput(LoopSparseError):
    """An operation requiring at least one element received none."""


class ParseError(LoopSparseError):
    """A file could not be parsed; carries the offending record index."""

    def __init__(self, message, record=None):
        super().__init__(message if record is None else f"{message} (record {record})")
        self.record = record


class OutOfRange(LoopSparseError):
    """A column or frame index lies outside the valid range."""


class BreakpointCapExceeded(LoopSparseError):
    """The homotopy path used more breakpoints than allowed (cycling guard)."""


class NumericalBreakdown(LoopSparseError):
    """The active-set Gram factor lost positive-definiteness beyond repair."""


class IterationCapExceeded(LoopSparseError):
    """An iterative oracle failed to converge within its sweep budget."""


class Infeasible(LoopSparseError):
    """No support within the size cap meets the residual tolerance."""


class EnumerationTooLarge(LoopSparseError):
    """Subset enumeration would exceed the tractability guard."""


class NoEligibleColumns(LoopSparseError):
    """Every candidate column is excluded by the temporal window."""
