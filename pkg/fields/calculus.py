from dataclasses import dataclass

import numpy as np


class CalculusMixin:
    """Vector-calculus identities built on derivative() and laplacian()"""

    def derivative(self, field: np.ndarray, axis: int) -> np.ndarray:
        raise NotImplementedError

    def laplacian(self, field: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, field: np.ndarray) -> np.ndarray:
        """Gradient along a new leading axis: out[k] = d_k field"""
        return np.stack([self.derivative(field, k) for k in range(3)])

    def divergence(self, vector: np.ndarray) -> np.ndarray:
        return sum(self.derivative(vector[k], k) for k in range(3))

    def tensor_divergence(self, tensor: np.ndarray) -> np.ndarray:
        """(div T)_j = d_k T_kj"""
        return np.stack([sum(self.derivative(tensor[k, j], k) for k in range(3)) for j in range(3)])

    def advect(self, velocity: np.ndarray, field: np.ndarray) -> np.ndarray:
        """(u . grad) f for a field with any leading component axes"""
        return sum(velocity[k] * self.derivative(field, k) for k in range(3))

    def radial_derivative(self, coordinates: np.ndarray, field: np.ndarray) -> np.ndarray:
        """(x . grad) f"""
        return self.advect(coordinates, field)


@dataclass(frozen=True)
class DivergenceSummary:
    samples: np.ndarray
    max_abs: float
    relative: float
