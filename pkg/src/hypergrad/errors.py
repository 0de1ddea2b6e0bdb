"""Exception types shared across the package.

Every error raised on purpose derives from HypergradError so callers (and the
command-line driver) can distinguish configuration mistakes from numerical
failures.
"""


class HypergradError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HypergradError):
    """A vector, matrix, or dataset has a shape incompatible with its slot."""


class ValidationError(HypergradError):
    """An input value violates a documented precondition (e.g. non-SPD A)."""


class NumericError(HypergradError):
    """A non-finite value appeared, or a linear solve broke down.

    Attributes
    ----------
    node_id : id of the graph node that produced the value, if known.
    op      : name of the operation that produced it, if known.
    step    : optimizer step index at which the failure surfaced, if known.
    """

    def __init__(self, message, node_id=None, op=None, step=None):
        super().__init__(message)
        self.node_id = node_id
        self.op = op
        self.step = step


class CapacityError(HypergradError):
    """A resource cap was exceeded (dense Hessian size, unroll length)."""


class ConfigError(HypergradError):
    """An experiment configuration is missing, malformed, or contradictory."""


class CsvParseError(HypergradError):
    """A CSV input could not be parsed.  Carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
