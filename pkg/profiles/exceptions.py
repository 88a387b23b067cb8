class SolverError(Exception):
    """Base class for fixed-point solver errors"""


class FixedPointError(SolverError):
    """Picard iteration stopped without converging; the partial result is attached"""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MaxItersExceeded(FixedPointError):
    pass


class DivergenceDetected(FixedPointError):
    """Residual grew tenfold over its minimum"""


class AprioriBoundExceeded(FixedPointError):
    """Iterate norm passed the configured ceiling"""


class ContinuationStalled(SolverError):
    def __init__(self, message, last_good_sigma=None, results=None):
        super().__init__(message)
        self.last_good_sigma = last_good_sigma
        self.results = list(results or [])
