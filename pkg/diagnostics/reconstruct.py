"""Self-similar solutions rebuilt from their profile at t = 1"""
from typing import Optional, Tuple, Union

import numpy as np

from caloric.services import CaloricProfile
from evolver.integrator import EvolveState
from fields.grid import GridSpec
from fields.norms import AnyProfile
from fields.profiles import TensorProfile, VectorProfile
from fields.sampling import ProfileSampler

from .exceptions import DiagnosticsError

CaloricLike = Union[CaloricProfile, AnyProfile]


def _sampler(profile: CaloricLike, decay: float) -> ProfileSampler:
    field = getattr(profile, 'field', profile)
    return ProfileSampler(field.grid, field.data, decay)


def _scaled(correction: AnyProfile, caloric: CaloricLike, points: np.ndarray, t: float) -> np.ndarray:
    scale = np.sqrt(t)
    y = points / scale
    values = _sampler(caloric, 1.0)(y) + _sampler(correction, 1.0 + correction.gamma)(y)
    return values / scale


def self_similar_reconstruct(v_hat: AnyProfile, H_hat: Optional[AnyProfile], U0: CaloricLike,
                             G0: Optional[CaloricLike], points, t: float
                             ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    u(x, t) = t^{-1/2} (U0 + v_hat)(x / sqrt(t)) and the same for F with
    G0 + H_hat, at points of shape (N, 3).

    Profiles are interpolated inside the box and continued outside it by
    their decay rates (1 for the caloric part, 1 + gamma for the
    correction). Returns (u, F) with component axes first; F is None when
    no deformation profile is given.
    """
    if not t > 0:
        raise DiagnosticsError(f'self-similar solutions are defined for t > 0, got t={t}')
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != 3:
        raise ValueError(f'points must have shape (N, 3), got {points.shape}')
    u = _scaled(v_hat, U0, points, t)
    F = None if H_hat is None or G0 is None else _scaled(H_hat, G0, points, t)
    return u, F


def reconstruct_state(v_hat: VectorProfile, H_hat: TensorProfile, U0: CaloricLike, G0: CaloricLike,
                      t: float, sigma: float = 1.0, grid: Optional[GridSpec] = None) -> EvolveState:
    """The self-similar solution at time t sampled on the nodes of grid (default: the profile grid)"""
    grid = grid or v_hat.grid
    points = np.moveaxis(grid.coordinates, 0, -1).reshape(-1, 3)
    u, F = self_similar_reconstruct(v_hat, H_hat, U0, G0, points, t)
    return EvolveState(
        VectorProfile(grid, u.reshape((3,) + grid.shape), v_hat.gamma),
        TensorProfile(grid, F.reshape((3, 3) + grid.shape), H_hat.gamma),
        t, sigma,
    )
