"""Exception hierarchy shared by all modules."""


class SgacsError(Exception):
    """Base class for every error raised by this package."""


class GridError(SgacsError):
    """Fields that do not live on the expected grid."""


class SizeError(GridError):
    """An axis is too short for the requested stencil."""


class DimensionError(SgacsError):
    """Operation not defined in the requested spatial dimension."""


class PreconditionError(SgacsError):
    pass


class DegenerateInputError(PreconditionError):
    pass


class TruncationError(SgacsError):
    """Fock cutoff too small: the discarded tail carries too much weight."""


class ConvergenceError(SgacsError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericError(SgacsError):
    """Non-finite values where finite ones are required."""


class CflError(SgacsError):
    pass


class BlowUpError(NumericError):
    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class ConfigError(SgacsError):
    """Invalid or incomplete scenario configuration."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
