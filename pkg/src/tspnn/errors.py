"""Exception hierarchy shared by every solver."""


class TspError(Exception):
    """Base class for all errors raised by tspnn."""


class InstanceTooSmall(TspError, ValueError):
    pass


class InvalidTour(TspError, ValueError):
    pass


class FormatError(TspError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Unsupported(TspError, ValueError):
    pass


class IndexOutOfRange(TspError, IndexError):
    pass


class TooLargeForBruteForce(TspError, ValueError):
    pass


class TooLargeForHeldKarp(TspError, ValueError):
    pass


class ShapeError(TspError, ValueError):
    pass


class NumericalError(TspError, FloatingPointError):
    pass


class NumericalDivergence(NumericalError):
    pass


class DecodeError(TspError):
    """Raised when an activation matrix does not select a permutation."""

    def __init__(self, reason="NotPermutation", X=None):
        self.reason = reason
        self.X = X
        super().__init__(reason)


class InvalidConvergence(TspError):
    """Hopfield run ended in a state that does not decode to a tour.

    The final activation matrix is kept on ``X`` for inspection.
    """

    def __init__(self, X, steps):
        self.X = X
        self.steps = steps
        super().__init__(f"no valid tour after {steps} steps")


class NoNeighbors(TspError, ValueError):
    pass


class ConfigError(TspError, ValueError):
    pass


class TrainingDiverged(NumericalError):
    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class InvalidCover(TspError, ValueError):
    pass
