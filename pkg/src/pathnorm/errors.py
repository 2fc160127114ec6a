"""Exception types shared across the package."""


class PathnormError(Exception):
    """Base class for all package errors."""


class GraphError(PathnormError):
    """Structurally invalid graph (cycles, dead nodes, bad node ids)."""


class ConfigError(PathnormError):
    """Rejected configuration or argument."""


class NumericError(PathnormError):
    """Non-finite value produced during evaluation.

    `node` or `edge` identify where the value first appeared, when known.
    """

    def __init__(self, message, node=None, edge=None):
        super().__init__(message)
        self.node = node
        self.edge = edge


class IdxFormatError(PathnormError):
    """Malformed IDX file. `offset` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ConvergenceError(PathnormError):
    """Iterative routine hit its sweep cap. `residual` is the last improvement."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
