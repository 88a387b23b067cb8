from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .exceptions import GridError


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform periodic grid on the box [-L, L)^3.

    Nodes sit at -L + i*h, i = 0..n-1, h = 2L/n, so the origin is a node
    for even n. Quadrature schedules for the caloric convolution (sphere
    rule) and the Duhamel time integral travel with the grid.
    """
    half_width: float
    n: int
    origin_mask_radius: Optional[float] = None
    sphere_polar: int = 32
    sphere_azimuth: int = 64
    duhamel_nodes: int = 64
    _radius: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        if not self.half_width > 0:
            raise GridError(f'half_width must be positive, got {self.half_width}')
        if self.n < 8 or self.n % 2:
            raise GridError(f'n must be even and at least 8, got {self.n}')
        h = 2.0 * self.half_width / self.n
        radius = 2.0 * h if self.origin_mask_radius is None else float(self.origin_mask_radius)
        if radius < h * (1 - 1e-12):
            raise GridError(
                f'origin_mask_radius {radius} is below the grid spacing {h}'
            )
        if self.sphere_polar < 4 or self.sphere_azimuth < 8 or self.sphere_azimuth % 2:
            raise GridError('sphere rule needs >= 4 polar and an even number >= 8 of azimuth nodes')
        if self.duhamel_nodes < 2:
            raise GridError('duhamel_nodes must be at least 2')
        object.__setattr__(self, '_radius', radius)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def mask_radius(self) -> float:
        return self._radius

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (3, n, n, n), axis 0 is x1"""
        return np.stack(np.meshgrid(self.axis, self.axis, self.axis, indexing='ij'))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coordinates ** 2, axis=0))

    @cached_property
    def japanese_bracket(self) -> np.ndarray:
        """<x> = sqrt(1 + |x|^2) at every node"""
        return np.sqrt(1.0 + self.radius ** 2)

    @cached_property
    def origin_mask(self) -> np.ndarray:
        """True on nodes inside the masked ball around the origin"""
        return self.radius < self._radius

    def interior(self, band: int) -> np.ndarray:
        """Nodes at least `band` cells away from every face of the box"""
        idx = np.arange(self.n)
        keep = (idx >= band) & (idx <= self.n - 1 - band)
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def index_of(self, point) -> Tuple[int, int, int]:
        """Nearest node index of a point inside the box"""
        point = np.asarray(point, dtype=float)
        idx = np.rint((point + self.half_width) / self.spacing).astype(int)
        return tuple(int(i) % self.n for i in idx)

    def with_half_width(self, half_width: float) -> 'GridSpec':
        """Same resolution and schedules on a box of another size"""
        scale = half_width / self.half_width
        return GridSpec(
            half_width=half_width,
            n=self.n,
            origin_mask_radius=self._radius * scale,
            sphere_polar=self.sphere_polar,
            sphere_azimuth=self.sphere_azimuth,
            duhamel_nodes=self.duhamel_nodes,
        )
