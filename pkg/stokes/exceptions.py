class StokesError(Exception):
    """Base class for linear solver errors"""


class DuhamelQuadratureError(StokesError):
    """Halving the Duhamel schedule moved the result by more than the tolerance"""

    def __init__(self, message, change=None, n_nodes=None):
        super().__init__(message)
        self.change = change
        self.n_nodes = n_nodes
