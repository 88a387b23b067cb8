from dataclasses import dataclass, replace
from typing import ClassVar, Tuple

import numpy as np

from .exceptions import GridMismatch
from .grid import GridSpec


@dataclass(frozen=True, eq=False)
class _Profile:
    """Samples of a field at the nodes of a grid, plus the decay exponent used by norms"""
    grid: GridSpec
    data: np.ndarray
    gamma: float = 0.5
    masked: bool = False

    component_shape: ClassVar[Tuple[int, ...]] = ()
    rank: ClassVar[int] = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        expected = self.component_shape + self.grid.shape
        if data.shape != expected:
            raise ValueError(
                f'{type(self).__name__} expects data of shape {expected}, got {data.shape}'
            )
        if not np.all(np.isfinite(data)):
            raise ValueError(f'{type(self).__name__} has non-finite samples')
        object.__setattr__(self, 'data', data)

    @classmethod
    def zeros(cls, grid: GridSpec, gamma: float = 0.5, masked: bool = False):
        return cls(grid, np.zeros(cls.component_shape + grid.shape), gamma, masked)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean (Frobenius for tensors) norm"""
        if not self.component_shape:
            return np.abs(self.data)
        axes = tuple(range(len(self.component_shape)))
        return np.sqrt(np.sum(self.data ** 2, axis=axes))

    def with_data(self, data: np.ndarray):
        return replace(self, data=data)

    def check_grid(self, other: '_Profile'):
        if self.grid != other.grid:
            raise GridMismatch(f'grid mismatch: {self.grid} vs {other.grid}')

    def __add__(self, other):
        self.check_grid(other)
        return replace(self, data=self.data + other.data, masked=self.masked or other.masked)

    def __sub__(self, other):
        self.check_grid(other)
        return replace(self, data=self.data - other.data, masked=self.masked or other.masked)

    def __mul__(self, scalar: float):
        return replace(self, data=float(scalar) * self.data)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


@dataclass(frozen=True, eq=False)
class ScalarProfile(_Profile):
    component_shape: ClassVar[Tuple[int, ...]] = ()
    rank: ClassVar[int] = 0


@dataclass(frozen=True, eq=False)
class VectorProfile(_Profile):
    """3-vector field, data[i] is the i-th component"""
    component_shape: ClassVar[Tuple[int, ...]] = (3,)
    rank: ClassVar[int] = 1


@dataclass(frozen=True, eq=False)
class TensorProfile(_Profile):
    """3x3 matrix field, data[i, j] = F_ij; column j is data[:, j]"""
    component_shape: ClassVar[Tuple[int, ...]] = (3, 3)
    rank: ClassVar[int] = 2

    def column(self, j: int) -> VectorProfile:
        return VectorProfile(self.grid, self.data[:, j], self.gamma, self.masked)

    def columns(self):
        return [self.column(j) for j in range(3)]

    @classmethod
    def from_columns(cls, columns, gamma: float = None, masked: bool = False) -> 'TensorProfile':
        first = columns[0]
        data = np.stack([c.data for c in columns], axis=1)
        return cls(first.grid, data, first.gamma if gamma is None else gamma, masked)

    def transpose(self) -> 'TensorProfile':
        return replace(self, data=np.swapaxes(self.data, 0, 1))
