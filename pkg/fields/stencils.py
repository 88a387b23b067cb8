import numpy as np
from scipy.ndimage import correlate1d

from .calculus import CalculusMixin
from .grid import GridSpec

# eighth-order central differences
FIRST_DERIVATIVE = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
SECOND_DERIVATIVE = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])

STENCIL_BAND = 4


class StencilCalculus(CalculusMixin):
    """
    Finite-difference calculus for profiles that are not periodic on the box.

    Results within STENCIL_BAND cells of a face are not meaningful; use
    grid.interior(STENCIL_BAND) to restrict.
    """

    band = STENCIL_BAND

    def __init__(self, grid: GridSpec):
        self.grid = grid

    def derivative(self, field: np.ndarray, axis: int) -> np.ndarray:
        ax = field.ndim - 3 + axis
        return correlate1d(field, FIRST_DERIVATIVE, axis=ax, mode='wrap') / self.grid.spacing

    def laplacian(self, field: np.ndarray) -> np.ndarray:
        h2 = self.grid.spacing ** 2
        return sum(
            correlate1d(field, SECOND_DERIVATIVE, axis=field.ndim - 3 + k, mode='wrap')
            for k in range(3)
        ) / h2
