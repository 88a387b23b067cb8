"""Pointwise residuals of the profile system and related identities"""
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from caloric.services import CaloricProfile
from fields.calculus import CalculusMixin
from fields.profiles import ScalarProfile, TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace
from fields.stencils import STENCIL_BAND, StencilCalculus
from profiles.sources import full_fields, gram, outer
from stokes.operators import recover_pressure

CaloricLike = Union[CaloricProfile, VectorProfile, TensorProfile]

RESIDUAL_BLOCKS = ('momentum', 'divergence', 'deformation')


@dataclass(frozen=True)
class ResidualSummary:
    max_abs: float
    l2: float

    def as_dict(self) -> Dict[str, float]:
        return {'max_abs': self.max_abs, 'l2': self.l2}


def _calculus(grid, method: str) -> CalculusMixin:
    if method == 'stencil':
        return StencilCalculus(grid)
    if method == 'spectral':
        return FourierWorkspace(grid)
    raise ValueError(f"unknown derivative method '{method}', expected 'stencil' or 'spectral'")


def _summarise(block: np.ndarray, keep: np.ndarray, cell_volume: float) -> ResidualSummary:
    lead = tuple(range(block.ndim - 3))
    magnitude = np.sqrt(np.sum(block ** 2, axis=lead)) if lead else np.abs(block)
    values = magnitude[keep]
    if values.size == 0:
        return ResidualSummary(0.0, 0.0)
    return ResidualSummary(float(np.max(values)), float(np.sqrt(np.sum(values ** 2) * cell_volume)))


def _self_similar_part(calc: CalculusMixin, field: np.ndarray, coordinates: np.ndarray) -> np.ndarray:
    """-Delta f - f/2 - (x . grad) f / 2"""
    return -calc.laplacian(field) - 0.5 * field - 0.5 * calc.radial_derivative(coordinates, field)


def residual_fields(v_hat: VectorProfile, H_hat: TensorProfile, U0: CaloricLike, G0: CaloricLike,
                    sigma: float, ws: Optional[CalculusMixin] = None, method: str = 'stencil',
                    pressure: Optional[ScalarProfile] = None) -> Dict[str, np.ndarray]:
    """
    Pointwise residuals of the three equation blocks of the profile system with
    U = U0 + v_hat, G = G0 + H_hat:

        momentum     -Delta U - U/2 - (x.grad)U/2 + sigma(U.grad)U - sigma sum_l (G_l.grad)G_l + grad P
        divergence   div U
        deformation  column j: -Delta G_j - G_j/2 - (x.grad)G_j/2 + sigma((U.grad)G_j - (G_j.grad)U)

    P defaults to recover_pressure(sigma (G G^t - U x U)). Derivatives come
    from ws when given, otherwise from the stencil or spectral calculus
    named by method.
    """
    U, G = full_fields(v_hat, H_hat, U0, G0)
    grid = v_hat.grid
    calc = ws if ws is not None else _calculus(grid, method)
    x = grid.coordinates

    if pressure is None:
        flux = sigma * (gram(G) - outer(U, U))
        pressure = recover_pressure(TensorProfile(grid, flux), calc if isinstance(calc, FourierWorkspace) else None)
    else:
        v_hat.check_grid(pressure)

    momentum = _self_similar_part(calc, U, x) + calc.gradient(pressure.data)
    deformation = _self_similar_part(calc, G, x)
    if sigma != 0.0:
        momentum = momentum + sigma * (calc.advect(U, U) - sum(calc.advect(G[:, l], G[:, l]) for l in range(3)))
        stretch = np.stack([calc.advect(G[:, j], U) for j in range(3)], axis=1)
        deformation = deformation + sigma * (calc.advect(U, G) - stretch)
    return {'momentum': momentum, 'divergence': calc.divergence(U), 'deformation': deformation}


def profile_residual(v_hat: VectorProfile, H_hat: TensorProfile, U0: CaloricLike, G0: CaloricLike,
                     sigma: float, ws: Optional[CalculusMixin] = None, method: str = 'stencil',
                     pressure: Optional[ScalarProfile] = None,
                     band: int = STENCIL_BAND) -> Dict[str, ResidualSummary]:
    """
    Max-abs and L2 of each block of residual_fields over the interior.

    Nodes within `band` cells of a face are excluded, and so are nodes in
    the origin mask when a field is masked.
    """
    blocks = residual_fields(v_hat, H_hat, U0, G0, sigma, ws, method, pressure)
    grid = v_hat.grid
    keep = grid.interior(band)
    masked = any(getattr(getattr(f, 'field', f), 'masked', False) for f in (v_hat, H_hat, U0, G0))
    if masked:
        keep = keep & ~grid.origin_mask
    h3 = grid.cell_volume
    return {name: _summarise(block, keep, h3) for name, block in blocks.items()}


def stress_identity_residual(G: TensorProfile, ws: Optional[CalculusMixin] = None,
                             method: str = 'spectral', band: int = 0) -> float:
    """
    max |div(G G^t) - sum_l (G_l.grad) G_l| relative to max |div(G G^t)|.

    The two agree exactly when every column of G is divergence-free; the
    difference is sum_l G_l div G_l.
    """
    calc = ws if ws is not None else _calculus(G.grid, method)
    data = G.data
    lhs = calc.tensor_divergence(gram(data))
    rhs = sum(calc.advect(data[:, l], data[:, l]) for l in range(3))
    keep = G.grid.interior(band) if band else np.ones(G.grid.shape, dtype=bool)
    scale = float(np.max(np.abs(lhs[:, keep]))) if np.any(keep) else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs((lhs - rhs)[:, keep]))) / scale
