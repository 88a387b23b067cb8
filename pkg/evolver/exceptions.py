class EvolverError(Exception):
    """Base class for time-stepping errors"""


class StepRejected(EvolverError):
    """Fixed-point sub-iteration of one step did not converge"""


class EvolverStepError(EvolverError):
    """A step kept failing after dt was halved down to the floor"""

    def __init__(self, message, t=None, dt=None):
        super().__init__(message)
        self.t = t
        self.dt = dt
