class SatseekError(Exception):
    """Base class for every error raised by the package."""


class InputError(SatseekError, ValueError):
    """Raised when arguments violate a documented precondition."""


class SolverError(SatseekError, RuntimeError):
    """The conic backend reported a numerical failure."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class SynthesisError(SatseekError, RuntimeError):
    """Gain recovery failed (e.g. numerically singular slack matrix)."""


class CrossValidationError(SatseekError, RuntimeError):
    """A synthesized certificate did not pass the independent analysis checks."""

    def __init__(self, message, analysis=None, inclusion=None):
        super().__init__(message)
        self.analysis = analysis
        self.inclusion = inclusion


class DivergenceError(SatseekError, RuntimeError):
    """A simulation produced a non-finite or runaway state.

    ``trace`` holds every sample up to and including the last finite one.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
