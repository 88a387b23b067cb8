import hashlib
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .exceptions import TraceError
from .grid import GridSpec
from .profiles import ScalarProfile, TensorProfile, VectorProfile

logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray], np.ndarray]

# cells padded on each side of the (theta, phi) table before spline fitting
_PAD = 3


@dataclass(frozen=True)
class SphericalRule:
    """Product rule on S^2: Gauss-Legendre in cos(theta) times trapezoid in phi"""
    n_polar: int = 32
    n_azimuth: int = 64

    @cached_property
    def theta(self) -> np.ndarray:
        mu, _ = np.polynomial.legendre.leggauss(self.n_polar)
        return np.arccos(mu[::-1])

    @cached_property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights, shape (n_polar, n_azimuth), summing to 4*pi"""
        _, w = np.polynomial.legendre.leggauss(self.n_polar)
        return np.outer(w[::-1], np.full(self.n_azimuth, 2.0 * np.pi / self.n_azimuth))

    @cached_property
    def nodes(self) -> np.ndarray:
        """Unit vectors, shape (n_polar, n_azimuth, 3)"""
        th, ph = np.meshgrid(self.theta, self.phi, indexing='ij')
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    @property
    def exactness_degree(self) -> int:
        """Spherical harmonics up to this degree are integrated exactly"""
        return min(2 * self.n_polar - 1, self.n_azimuth - 1)

    @classmethod
    def for_grid(cls, grid: GridSpec) -> 'SphericalRule':
        return cls(grid.sphere_polar, grid.sphere_azimuth)


@dataclass(frozen=True, eq=False)
class SphericalTrace:
    """
    Degree -1 homogeneous datum x -> omega(x/|x|)/|x| stored by omega at the
    nodes of a spherical rule.

    values has shape (n_polar, n_azimuth) + value_shape where value_shape is
    () for scalar test data, (3,) for u0 and (3, 3) for F0 (column j = F0_j).
    """
    rule: SphericalRule
    values: np.ndarray
    curl_constructed: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape[:2] != (self.rule.n_polar, self.rule.n_azimuth):
            raise TraceError(
                f'trace table {values.shape[:2]} does not match rule '
                f'{(self.rule.n_polar, self.rule.n_azimuth)}'
            )
        if values.shape[2:] not in ((), (3,), (3, 3)):
            raise TraceError(f'unsupported trace value shape {values.shape[2:]}')
        if not np.all(np.isfinite(values)):
            raise TraceError('trace has non-finite values')
        object.__setattr__(self, 'values', values)

    @property
    def value_shape(self) -> Tuple[int, ...]:
        return self.values.shape[2:]

    @property
    def c_star(self) -> float:
        """sup over nodes of |omega|: the constant C* of the |x|^-1 bound"""
        axes = tuple(range(2, self.values.ndim))
        mags = np.sqrt(np.sum(self.values ** 2, axis=axes)) if axes else np.abs(self.values)
        return float(np.max(mags))

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(f'{self.rule.n_polar}x{self.rule.n_azimuth}'.encode())
        return h.hexdigest()[:16]

    def scaled(self, factor: float) -> 'SphericalTrace':
        return replace(self, values=factor * self.values)

    def __add__(self, other: 'SphericalTrace') -> 'SphericalTrace':
        if self.rule != other.rule:
            raise TraceError('cannot add traces on different rules')
        return SphericalTrace(self.rule, self.values + other.values,
                              self.curl_constructed and other.curl_constructed)

    @cached_property
    def _splines(self):
        """One bicubic spline per component on a pole-reflected, phi-periodic table"""
        th, ph = self.rule.theta, self.rule.phi
        na = self.rule.n_azimuth
        theta_ext = np.concatenate([-th[_PAD - 1::-1], th, 2.0 * np.pi - th[:-_PAD - 1:-1]])
        phi_ext = np.concatenate([ph[-_PAD:] - 2.0 * np.pi, ph, ph[:_PAD] + 2.0 * np.pi])

        flat = self.values.reshape(self.rule.n_polar, na, -1)
        # across a pole, (-theta, phi) is the point (theta, phi + pi)
        flipped = np.roll(flat, -na // 2, axis=1)
        table = np.concatenate([flipped[_PAD - 1::-1], flat, flipped[:-_PAD - 1:-1]], axis=0)
        table = np.concatenate([table[:, -_PAD:], table, table[:, :_PAD]], axis=1)
        return [
            RectBivariateSpline(theta_ext, phi_ext, table[:, :, c], kx=3, ky=3, s=0)
            for c in range(table.shape[2])
        ]

    def evaluate(self, directions: np.ndarray) -> np.ndarray:
        """
        Interpolate omega at arbitrary nonzero directions.

        Args:
            directions: array (..., 3); need not be normalised

        Returns:
            array (...,) + value_shape
        """
        directions = np.asarray(directions, dtype=float)
        r = np.linalg.norm(directions, axis=-1)
        with np.errstate(invalid='ignore', divide='ignore'):
            cos_t = np.clip(directions[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0)
        theta = np.arccos(cos_t)
        phi = np.mod(np.arctan2(directions[..., 1], directions[..., 0]), 2.0 * np.pi)
        out = np.stack([s.ev(theta.ravel(), phi.ravel()) for s in self._splines], axis=-1)
        return out.reshape(directions.shape[:-1] + self.value_shape)


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def curl_of_degree0_potential(
    potential: Potential,
    rule: Optional[SphericalRule] = None,
    step: float = 1e-3,
) -> SphericalTrace:
    """
    Trace of u0 = curl A for a degree-0 homogeneous vector potential A.

    The potential is called on unit vectors (array (..., 3)) and extended to
    R^3 \\ {0} by A(x) = potential(x/|x|). Derivatives are fourth-order
    central differences in ambient coordinates at the nodes of the rule;
    since u0 is homogeneous of degree -1 its trace is u0 on the unit sphere.

    Raises:
        TraceError: if the potential or its derivatives are not finite on S^2
    """
    rule = rule or SphericalRule()
    x = rule.nodes

    def A(points):
        return np.asarray(potential(_unit(points)), dtype=float)

    try:
        base = A(x)
    except (FloatingPointError, ZeroDivisionError) as e:
        raise TraceError(f'potential cannot be evaluated on S^2: {e}') from e
    if base.shape != x.shape:
        raise TraceError(f'potential must return 3-vectors, got shape {base.shape}')

    jac = np.empty(x.shape + (3,))  # jac[..., i, k] = d_k A_i
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        jac[..., k] = (-A(x + 2 * e) + 8 * A(x + e) - 8 * A(x - e) + A(x - 2 * e)) / (12 * step)
    if not np.all(np.isfinite(jac)):
        raise TraceError('potential derivatives are not finite on S^2')

    curl = np.stack([
        jac[..., 2, 1] - jac[..., 1, 2],
        jac[..., 0, 2] - jac[..., 2, 0],
        jac[..., 1, 0] - jac[..., 0, 1],
    ], axis=-1)
    return SphericalTrace(rule, curl, curl_constructed=True)


def sample_trace(trace: SphericalTrace, grid: GridSpec, gamma: float = 0.5):
    """
    Sample the degree -1 field omega(x/|x|)/|x| at the grid nodes.

    Nodes inside the origin mask are set to zero and the profile is flagged
    masked, so sup-norms skip them.
    """
    mask = grid.origin_mask
    points = np.moveaxis(grid.coordinates, 0, -1)[~mask]
    r = grid.radius[~mask]
    omega = trace.evaluate(points)
    omega = omega / r.reshape((-1,) + (1,) * len(trace.value_shape))

    data = np.zeros(trace.value_shape + grid.shape)
    moved = np.moveaxis(data, tuple(range(len(trace.value_shape))),
                        tuple(range(3, 3 + len(trace.value_shape))))
    moved[~mask] = omega

    profile_cls = {(): ScalarProfile, (3,): VectorProfile, (3, 3): TensorProfile}[trace.value_shape]
    return profile_cls(grid, data, gamma, masked=True)


# Degree-0 potential families, functions of the unit vector

def constant_potential(vector=(0.0, 0.0, 1.0)) -> Potential:
    vector = np.asarray(vector, dtype=float)
    return lambda xh: np.broadcast_to(vector, xh.shape).copy()


def axial_potential(axis: int = 2) -> Potential:
    """A = xhat_axis e_axis; axis 2 gives u0 = (-x2 x3, x1 x3, 0)/|x|^3"""
    def A(xh):
        out = np.zeros_like(xh)
        out[..., axis] = xh[..., axis]
        return out
    return A


def helical_potential(axis: int = 2) -> Potential:
    """A = (e_axis x xhat) * xhat_axis, a swirl whose strength changes sign across the equator"""
    e = np.zeros(3)
    e[axis] = 1.0
    return lambda xh: np.cross(e, xh) * xh[..., axis:axis + 1]


def dipole_potential(axis: int = 2) -> Potential:
    """A = (x2 x3, x3 x1, x1 x2) in unit-vector components, cyclically relabelled about the axis"""
    def A(xh):
        x = np.roll(xh, 2 - axis, axis=-1)
        out = np.stack([x[..., 1] * x[..., 2], x[..., 2] * x[..., 0], x[..., 0] * x[..., 1]], axis=-1)
        return np.roll(out, axis - 2, axis=-1)
    return A


POTENTIAL_FAMILIES: Dict[str, Callable[[int], Potential]] = {
    'constant': lambda axis: constant_potential(np.eye(3)[axis]),
    'axial': axial_potential,
    'helical': helical_potential,
    'dipole': dipole_potential,
}


@dataclass(frozen=True)
class DatumSpec:
    """Named initial datum: u0 and the columns of F0 as curls of degree-0 potentials"""
    velocity_potential: str = 'axial'
    deformation_potential: str = 'axial'
    amplitude: float = 0.01
    deformation_ratio: float = 1.0
    trace_file: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Datum:
    velocity: SphericalTrace
    deformation: SphericalTrace
    spec: DatumSpec = field(default_factory=DatumSpec)

    @property
    def c_star(self) -> float:
        return self.velocity.c_star + self.deformation.c_star


def _normalised(trace: SphericalTrace, target: float) -> SphericalTrace:
    current = trace.c_star
    if current == 0.0:
        return trace
    return trace.scaled(target / current)


def build_datum(spec: DatumSpec, rule: Optional[SphericalRule] = None) -> Datum:
    """
    Build (u0, F0) traces for a datum spec.

    u0 comes from the velocity family about the x3 axis; column j of F0
    from the deformation family about axis (j + 1) mod 3. Each trace is
    rescaled so that its sup equals the amplitude (times deformation_ratio
    for F0). A trace_file (npz with 'velocity' and optional 'deformation'
    tables on the same rule) replaces the families.
    """
    rule = rule or SphericalRule()
    if spec.trace_file:
        return _load_datum(Path(spec.trace_file), rule, spec)

    for name in (spec.velocity_potential, spec.deformation_potential):
        if name not in POTENTIAL_FAMILIES:
            raise TraceError(f'unknown potential family {name!r}')

    velocity = curl_of_degree0_potential(POTENTIAL_FAMILIES[spec.velocity_potential](2), rule)
    columns = [
        curl_of_degree0_potential(POTENTIAL_FAMILIES[spec.deformation_potential]((j + 1) % 3), rule).values
        for j in range(3)
    ]
    deformation = SphericalTrace(rule, np.stack(columns, axis=-1), curl_constructed=True)

    return Datum(
        velocity=_normalised(velocity, spec.amplitude),
        deformation=_normalised(deformation, spec.amplitude * spec.deformation_ratio),
        spec=spec,
    )


def _load_datum(path: Path, rule: SphericalRule, spec: DatumSpec) -> Datum:
    with np.load(path) as table:
        velocity = SphericalTrace(rule, table['velocity'])
        if 'deformation' in table:
            deformation = SphericalTrace(rule, table['deformation'])
        else:
            deformation = SphericalTrace(rule, np.zeros(velocity.values.shape[:2] + (3, 3)))
    logger.warning(f'Tabulated trace {path} is not curl-constructed; divergence is not guaranteed')
    return Datum(velocity, deformation, spec)


TraceLike = Union[SphericalTrace, Datum]
