from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from caloric.services import CaloricProfile
from fields.profiles import TensorProfile, VectorProfile

CaloricLike = Union[CaloricProfile, VectorProfile, TensorProfile]


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a x b)_ij = a_i b_j pointwise"""
    return np.einsum('i...,j...->ij...', a, b)


def gram(G: np.ndarray) -> np.ndarray:
    """(G G^t)_ij = G_ik G_jk pointwise"""
    return np.einsum('ik...,jk...->ij...', G, G)


def column_fluxes(U: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Q_j = G_j x U - U x G_j for j = 0..2, stacked on a leading axis"""
    return np.stack([outer(G[:, j], U) - outer(U, G[:, j]) for j in range(3)])


@dataclass(frozen=True, eq=False)
class Sources:
    """
    Quadratic sources of the profile equations.

    q_hat is U x U + G G^t; momentum_flux = G G^t - U x U is what drives v
    (its divergence is the nonlinear force); Q_hat[j] drives column j of H.
    """
    q_hat: TensorProfile
    momentum_flux: TensorProfile
    Q_hat: Tuple[TensorProfile, TensorProfile, TensorProfile]


def _field(profile: CaloricLike):
    return getattr(profile, 'field', profile)


def full_fields(v_hat: VectorProfile, H_hat: TensorProfile, U0: CaloricLike, G0: CaloricLike):
    """U = U0 + v_hat and G = G0 + H_hat as arrays, after checking the grids"""
    U0, G0 = _field(U0), _field(G0)
    v_hat.check_grid(U0)
    H_hat.check_grid(G0)
    v_hat.check_grid(H_hat)
    return U0.data + v_hat.data, G0.data + H_hat.data


def assemble_sources(v_hat: VectorProfile, H_hat: TensorProfile, U0: CaloricLike, G0: CaloricLike) -> Sources:
    U, G = full_fields(v_hat, H_hat, U0, G0)
    uu, gg = outer(U, U), gram(G)
    grid, gamma = v_hat.grid, v_hat.gamma
    return Sources(
        q_hat=TensorProfile(grid, uu + gg, gamma),
        momentum_flux=TensorProfile(grid, gg - uu, gamma),
        Q_hat=tuple(TensorProfile(grid, q, gamma) for q in column_fluxes(U, G)),
    )
