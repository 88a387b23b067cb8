from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .profiles import ScalarProfile, TensorProfile, VectorProfile

AnyProfile = Union[ScalarProfile, VectorProfile, TensorProfile]


@dataclass(frozen=True)
class XGammaNorm:
    """sup over unmasked nodes of <x>^{1+gamma} |u(x)|"""
    value: float
    gamma: float
    attained_at: Tuple[float, float, float]

    def __float__(self):
        return self.value


def x_gamma_norm(field: AnyProfile, gamma: Optional[float] = None) -> XGammaNorm:
    """
    Weighted sup norm of the space X_gamma.

    Tensor fields use the Frobenius norm pointwise. Masked profiles skip the
    origin ball of their grid.
    """
    gamma = field.gamma if gamma is None else gamma
    if not 0.0 < gamma <= 2.0:
        raise ValueError(f'gamma must lie in (0, 2], got {gamma}')
    grid = field.grid
    weighted = grid.japanese_bracket ** (1.0 + gamma) * field.magnitude()
    if field.masked:
        weighted = np.where(grid.origin_mask, 0.0, weighted)
    flat = int(np.argmax(weighted))
    idx = np.unravel_index(flat, grid.shape)
    point = tuple(float(grid.axis[i]) for i in idx)
    return XGammaNorm(value=float(weighted[idx]), gamma=gamma, attained_at=point)


def x_gamma4_norm(v_hat: VectorProfile, H_hat: TensorProfile, gamma: Optional[float] = None) -> float:
    """||(v, H)||_{X_gamma^4} = ||v|| + sum_j ||H_j||"""
    gamma = v_hat.gamma if gamma is None else gamma
    total = x_gamma_norm(v_hat, gamma).value
    for column in H_hat.columns():
        total += x_gamma_norm(column, gamma).value
    return total
