class CaloricError(Exception):
    """Base class for caloric profile errors"""


class CaloricQuadratureError(CaloricError):
    """Angular quadrature did not reach the tolerance at some node"""

    def __init__(self, message, worst_node=None, estimate=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.estimate = estimate
