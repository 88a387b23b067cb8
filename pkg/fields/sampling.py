import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from .grid import GridSpec


class ProfileSampler:
    """
    Evaluate profile samples at arbitrary points.

    Inside the cube |y|_inf <= L - margin*h the value is the tricubic
    spline interpolant. Outside, y is pulled radially back onto that cube
    and the value there is continued by the decay model
    f(y) = f(y_b) (<y_b>/<y>)^decay.
    """

    def __init__(self, grid: GridSpec, data: np.ndarray, decay: float, margin: int = 2):
        self.grid = grid
        self.decay = float(decay)
        self.inner = grid.half_width - margin * grid.spacing
        self.component_shape = data.shape[:-3]
        flat = np.asarray(data, dtype=float).reshape((-1,) + grid.shape)
        self._coeffs = [spline_filter(c, order=3, mode='mirror') for c in flat]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """
        Args:
            points: array (N, 3)

        Returns:
            array component_shape + (N,)
        """
        points = np.asarray(points, dtype=float)
        cube = np.max(np.abs(points), axis=1)
        outside = cube > self.inner
        anchors = points.copy()
        anchors[outside] *= (self.inner / cube[outside])[:, None]

        index = ((anchors + self.grid.half_width) / self.grid.spacing).T
        values = np.stack([
            map_coordinates(c, index, order=3, mode='mirror', prefilter=False)
            for c in self._coeffs
        ])
        if np.any(outside):
            ratio = np.sqrt(1.0 + np.sum(anchors[outside] ** 2, axis=1)) / \
                np.sqrt(1.0 + np.sum(points[outside] ** 2, axis=1))
            values[:, outside] *= ratio ** self.decay
        return values.reshape(self.component_shape + (points.shape[0],))

    def on_grid(self, scale: float) -> np.ndarray:
        """Values at x / scale for every grid node x, shaped like the profile data"""
        points = np.moveaxis(self.grid.coordinates, 0, -1).reshape(-1, 3) / scale
        return self(points).reshape(self.component_shape + self.grid.shape)
