"""
Heat flow of degree -1 homogeneous data.

For w0(x) = omega(x/|x|)/|x| the caloric profile is

    W0(x) = (e^Delta w0)(x) = int_{S^2} omega(theta) int_0^inf Gamma(x - r theta, 1) r dr dtheta.

The radial integral has a closed form (see ray_integral), so only the
angular rule is numerical. Its error is estimated per node with the
embedded rule that keeps every other azimuth node; nodes whose estimate
exceeds tol * C* are recomputed on refined rules.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import erfc

from fields.grid import GridSpec
from fields.norms import AnyProfile
from fields.profiles import ScalarProfile, TensorProfile, VectorProfile
from fields.sampling import ProfileSampler
from fields.stencils import StencilCalculus
from fields.traces import SphericalRule, SphericalTrace
from selfsim.conf import setting

from .exceptions import CaloricQuadratureError

logger = logging.getLogger(__name__)

_HEAT_NORM = (4.0 * np.pi) ** -1.5
_SQRT_PI = np.sqrt(np.pi)
_CHUNK = 2048

DEFAULT_TOLERANCE = 1e-2
DEFAULT_REFINEMENTS = 2


def ray_integral(r2: np.ndarray, s: np.ndarray) -> np.ndarray:
    """
    int_0^inf Gamma(x - r theta, 1) r dr with |x|^2 = r2 and s = x . theta

        = (4 pi)^{-3/2} [2 e^{-|x|^2/4} + sqrt(pi) s e^{-(|x|^2 - s^2)/4} erfc(-s/2)]
    """
    gap = np.maximum(r2 - s * s, 0.0)
    return _HEAT_NORM * (2.0 * np.exp(-0.25 * r2) + _SQRT_PI * s * np.exp(-0.25 * gap) * erfc(-0.5 * s))


@dataclass(frozen=True, eq=False)
class _AngularTable:
    nodes: np.ndarray
    weights: np.ndarray
    coarse_weights: np.ndarray
    omega: np.ndarray

    @classmethod
    def build(cls, trace: SphericalTrace, rule: SphericalRule) -> '_AngularTable':
        omega = trace.values if rule == trace.rule else trace.evaluate(rule.nodes)
        count = rule.n_polar * rule.n_azimuth
        coarse = np.zeros_like(rule.weights)
        coarse[:, ::2] = 2.0 * rule.weights[:, ::2]
        return cls(
            nodes=rule.nodes.reshape(count, 3),
            weights=rule.weights.reshape(count),
            coarse_weights=coarse.reshape(count),
            omega=omega.reshape(count, -1),
        )

    def integrate(self, points: np.ndarray):
        """Values (N, C) at points (N, 3) and the per-point embedded error estimate"""
        r2 = np.sum(points ** 2, axis=1)[:, None]
        kernel = ray_integral(r2, points @ self.nodes.T)
        full = kernel @ (self.weights[:, None] * self.omega)
        coarse = kernel @ (self.coarse_weights[:, None] * self.omega)
        return full, np.sqrt(np.sum((full - coarse) ** 2, axis=1))


@dataclass(frozen=True, eq=False)
class CaloricProfile:
    """W0 = e^Delta w0 sampled on a grid, with the datum constant C*"""
    field: AnyProfile
    c_star: float
    error_estimate: float = 0.0
    trace_digest: str = ''

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    @property
    def data(self) -> np.ndarray:
        return self.field.data

    def sampler(self) -> ProfileSampler:
        """Interpolant continued outside the box by the |x|^-1 decay of W0"""
        return ProfileSampler(self.grid, self.field.data, decay=1.0)

    def decay_ratio(self) -> float:
        """sup <x>|W0(x)| / C*"""
        if self.c_star == 0.0:
            return 0.0
        return float(np.max(self.grid.japanese_bracket * self.field.magnitude())) / self.c_star

    @classmethod
    def zeros_like(cls, field: AnyProfile) -> 'CaloricProfile':
        return cls(field=field.with_data(np.zeros_like(field.data)), c_star=0.0)


def _refined(rule: SphericalRule, level: int) -> SphericalRule:
    return SphericalRule(rule.n_polar * 2 ** level, rule.n_azimuth * 2 ** level)


def caloric_profile(
    trace: SphericalTrace,
    grid: GridSpec,
    gamma: float = 0.5,
    tol: Optional[float] = None,
    max_refinements: Optional[int] = None,
) -> CaloricProfile:
    """
    Sample W0 = e^Delta (omega(x/|x|)/|x|) at every node of the grid.

    The angular rule starts from the grid's sphere rule. Nodes with an
    error estimate above tol * C* are recomputed on rules refined by
    factors of two in both directions, at most max_refinements times.

    Raises:
        CaloricQuadratureError: a node with |x| <= L still misses the
            tolerance on the finest rule; the worst node is attached
    """
    tol = setting('SELFSIM_CALORIC_TOLERANCE', DEFAULT_TOLERANCE) if tol is None else tol
    if max_refinements is None:
        max_refinements = setting('SELFSIM_CALORIC_REFINEMENTS', DEFAULT_REFINEMENTS)

    base = SphericalRule.for_grid(grid)
    points = np.moveaxis(grid.coordinates, 0, -1).reshape(-1, 3)
    size = points.shape[0]
    components = int(np.prod(trace.value_shape, dtype=int))

    values = np.empty((size, components))
    estimate = np.empty(size)
    table = _AngularTable.build(trace, base)
    for start in range(0, size, _CHUNK):
        part = slice(start, start + _CHUNK)
        values[part], estimate[part] = table.integrate(points[part])

    limit = tol * trace.c_star
    for level in range(1, max_refinements + 1):
        failing = np.flatnonzero(estimate > limit)
        if failing.size == 0:
            break
        rule = _refined(base, level)
        logger.debug(f'Refining caloric quadrature at {failing.size} nodes to {rule.n_polar}x{rule.n_azimuth}')
        table = _AngularTable.build(trace, rule)
        for start in range(0, failing.size, _CHUNK):
            idx = failing[start:start + _CHUNK]
            values[idx], estimate[idx] = table.integrate(points[idx])

    inside = np.sum(points ** 2, axis=1) <= grid.half_width ** 2
    failing = estimate > limit
    if np.any(failing & inside):
        worst = int(np.argmax(np.where(inside, estimate, -np.inf)))
        node = tuple(float(c) for c in points[worst])
        raise CaloricQuadratureError(
            f'caloric quadrature estimate {estimate[worst]:.3e} exceeds {limit:.3e} at node {node}',
            worst_node=node,
            estimate=float(estimate[worst]),
        )
    if np.any(failing):
        logger.warning(f'{int(np.sum(failing))} corner nodes beyond |x| = L miss the caloric tolerance')

    data = values.T.reshape(trace.value_shape + grid.shape)
    profile_cls = {(): ScalarProfile, (3,): VectorProfile, (3, 3): TensorProfile}[trace.value_shape]
    field = profile_cls(grid, data, gamma)
    max_estimate = float(np.max(np.where(inside, estimate, 0.0)))
    logger.info(f'Caloric profile on n={grid.n}, L={grid.half_width}: C*={trace.c_star:.4g}, '
                f'max error estimate {max_estimate:.3e}')
    return CaloricProfile(field=field, c_star=trace.c_star, error_estimate=max_estimate,
                          trace_digest=trace.digest)


def caloric_residual(profile: Union[CaloricProfile, AnyProfile], degree: float = 1.0) -> float:
    """
    max |-Delta W - (degree/2) W - (x . grad W)/2| over interior unmasked nodes.

    t^{-degree/2} W(x/sqrt(t)) solves the heat equation iff this vanishes;
    degree 1 for degree -1 data, 3 for the heat kernel profile itself.
    """
    field = getattr(profile, 'field', profile)
    grid = field.grid
    calc = StencilCalculus(grid)
    W = field.data
    residual = -calc.laplacian(W) - 0.5 * degree * W - 0.5 * calc.radial_derivative(grid.coordinates, W)

    keep = grid.interior(calc.band)
    if field.masked:
        keep = keep & ~grid.origin_mask
    lead = tuple(range(W.ndim - 3))
    magnitude = np.sqrt(np.sum(residual ** 2, axis=lead)) if lead else np.abs(residual)
    return float(np.max(magnitude[keep])) if np.any(keep) else 0.0
