"""Error hierarchy shared by the library and the CLI"""

from typing import Optional


class RtprefError(Exception):
    """Base class for all rtpref errors"""

    exit_code = 1


class ValidationError(RtprefError):
    """Invalid input data or configuration (CLI exit code 1)"""

    exit_code = 1

    def __init__(self, message: str, row: Optional[int] = None, line: Optional[int] = None):
        self.row = row
        self.line = line
        if row is not None:
            message = f"row {row}: {message}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(RtprefError):
    """A numerical procedure failed (CLI exit code 2)"""

    exit_code = 2


class SeriesConvergenceError(NumericalError):
    """Series did not reach the tolerance within the term cap"""


class RejectionLimitError(NumericalError):
    """Rejection sampler exceeded its proposal cap"""


class StepLimitError(NumericalError):
    """Path simulation exceeded its step cap"""


class DivergenceError(NumericalError):
    """An iterate became non-finite"""


class SeparationError(NumericalError):
    """Choice data are perfectly separable and no ridge term was given"""


class BracketError(NumericalError):
    """Root bracket does not straddle the target"""

    def __init__(self, message: str, attainable: Optional[tuple] = None):
        self.attainable = attainable
        if attainable is not None:
            message = f"{message} (attainable interval [{attainable[0]:.6g}, {attainable[1]:.6g}])"
        super().__init__(message)


class InconsistentEstimateError(NumericalError):
    """Two estimates that should agree in sign do not"""


class ConvergenceError(NumericalError):
    """An optimizer stopped short of stationarity"""

    def __init__(self, message: str, best: Optional[dict] = None):
        self.best = best
        super().__init__(message)
