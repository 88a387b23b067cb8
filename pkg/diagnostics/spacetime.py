"""
Local functionals on space-time samples: the excess Y over parabolic
cylinders, the left side of the smallness condition, and the local energy
balance tested against a bump function.

Quadrature is the midpoint rule on grid nodes inside the ball, combined
with the trapezoid rule over the sample times inside the time interval.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from fields.calculus import CalculusMixin
from fields.grid import GridSpec
from fields.spectral import FourierWorkspace

from .exceptions import CylinderOutOfRange, InvalidExponent, SupportViolation

logger = logging.getLogger(__name__)

TIME_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class SpaceTimeSamples:
    """
    Fields sampled at the nodes of one grid at increasing times.

    u has shape (T, 3, n, n, n), F (T, 3, 3, n, n, n) and p (T, n, n, n).
    """
    grid: GridSpec
    times: np.ndarray
    u: np.ndarray
    F: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, 'times', times)
        T = len(times)
        if T < 1 or np.any(np.diff(times) <= 0):
            raise ValueError('times must be a nonempty increasing sequence')
        expected = {'u': (T, 3) + self.grid.shape, 'F': (T, 3, 3) + self.grid.shape, 'p': (T,) + self.grid.shape}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f'{name} must have shape {shape}, got {getattr(self, name).shape}')

    @classmethod
    def from_states(cls, states: Sequence, ws: Optional[FourierWorkspace] = None) -> 'SpaceTimeSamples':
        """Stack evolver states; the pressure is recovered from each state"""
        if not states:
            raise ValueError('no states to sample')
        grid = states[0].grid
        ws = ws or FourierWorkspace(grid)
        return cls(
            grid=grid,
            times=np.array([s.t for s in states]),
            u=np.stack([s.u.data for s in states]),
            F=np.stack([s.F.data for s in states]),
            p=np.stack([s.pressure(ws).data for s in states]),
        )

    @classmethod
    def zeros(cls, grid: GridSpec, times) -> 'SpaceTimeSamples':
        T = len(times)
        return cls(grid, np.asarray(times, dtype=float), np.zeros((T, 3) + grid.shape),
                   np.zeros((T, 3, 3) + grid.shape), np.zeros((T,) + grid.shape))


@dataclass(frozen=True)
class ParabolicCylinder:
    """Q_r(z0) = B_r(x0) x (t0 - r^2, t0)"""
    x0: tuple
    t0: float
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f'cylinder radius must be positive, got {self.r}')
        object.__setattr__(self, 'x0', tuple(float(c) for c in self.x0))

    @property
    def t_start(self) -> float:
        return self.t0 - self.r ** 2

    def rescaled(self, scale: float) -> 'ParabolicCylinder':
        """Image under x -> x / scale, t -> t / scale^2"""
        return ParabolicCylinder(tuple(c / scale for c in self.x0), self.t0 / scale ** 2, self.r / scale)


class _CylinderQuadrature:
    """Node weights of a cylinder on the samples"""

    def __init__(self, samples: SpaceTimeSamples, cyl: ParabolicCylinder):
        grid = samples.grid
        reach = np.max(np.abs(cyl.x0)) + cyl.r
        if reach > grid.half_width - grid.spacing:
            raise CylinderOutOfRange(
                f'ball B_{cyl.r}({cyl.x0}) leaves the box of half-width {grid.half_width}')
        times = samples.times
        if cyl.t_start < times[0] - TIME_TOLERANCE or cyl.t0 > times[-1] + TIME_TOLERANCE:
            raise CylinderOutOfRange(
                f'time interval ({cyl.t_start}, {cyl.t0}) outside the samples [{times[0]}, {times[-1]}]')

        offset = grid.coordinates - np.array(cyl.x0)[:, None, None, None]
        self.ball = np.sum(offset ** 2, axis=0) <= cyl.r ** 2
        if not np.any(self.ball):
            raise CylinderOutOfRange(f'no grid node inside B_{cyl.r}({cyl.x0})')
        inside = (times >= cyl.t_start - TIME_TOLERANCE) & (times <= cyl.t0 + TIME_TOLERANCE)
        self.slices = np.flatnonzero(inside)
        self.time_weights = _trapezoid_weights(times[self.slices])

    @cached_property
    def _total(self) -> float:
        return float(np.sum(self.time_weights)) * int(np.sum(self.ball))

    def ball_values(self, data: np.ndarray) -> np.ndarray:
        """data (T, *c, n, n, n) -> (T_inside, *c, nodes)"""
        return data[self.slices][..., self.ball]

    def mean(self, pointwise: np.ndarray) -> float:
        """Space-time mean of a (T_inside, nodes) array"""
        if len(self.slices) == 1:
            return float(np.mean(pointwise))
        return float(np.sum(self.time_weights[:, None] * pointwise)) / self._total

    def space_time_mean(self, values: np.ndarray) -> np.ndarray:
        """Mean over the cylinder of each component, values (T_inside, *c, nodes)"""
        if len(self.slices) == 1:
            return np.mean(values[0], axis=-1)
        weighted = np.tensordot(self.time_weights, values, axes=(0, 0))
        return np.sum(weighted, axis=-1) / self._total


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    if len(times) == 1:
        return np.ones(1)
    gaps = np.diff(times)
    weights = np.zeros(len(times))
    weights[:-1] += 0.5 * gaps
    weights[1:] += 0.5 * gaps
    return weights


def _magnitude(values: np.ndarray, component_axes: int) -> np.ndarray:
    """Euclidean (Frobenius) norm over the component axes following the time axis"""
    if component_axes == 0:
        return np.abs(values)
    axes = tuple(range(1, 1 + component_axes))
    return np.sqrt(np.sum(values ** 2, axis=axes))


def epsilon_regularity_Y(samples: SpaceTimeSamples, cyl: ParabolicCylinder) -> float:
    """
    Y = (avg |v - (v)|^3)^{1/3} + (avg |H - (H)|^3)^{1/3} + r (avg |p - (p)(t)|^{3/2})^{2/3}

    (v), (H) are means over the cylinder; (p)(t) is the ball mean of p at
    each sample time.
    """
    quad = _CylinderQuadrature(samples, cyl)
    v = quad.ball_values(samples.u)
    H = quad.ball_values(samples.F)
    p = quad.ball_values(samples.p)

    v_dev = v - quad.space_time_mean(v)[None, :, None]
    H_dev = H - quad.space_time_mean(H)[None, :, :, None]
    p_dev = p - np.mean(p, axis=-1, keepdims=True)

    term_v = quad.mean(_magnitude(v_dev, 1) ** 3) ** (1.0 / 3.0)
    term_H = quad.mean(_magnitude(H_dev, 2) ** 3) ** (1.0 / 3.0)
    term_p = cyl.r * quad.mean(np.abs(p_dev) ** 1.5) ** (2.0 / 3.0)
    return term_v + term_H + term_p


def smallness_condition(samples: SpaceTimeSamples, cyl: ParabolicCylinder, m_exp: float,
                        a: Optional[np.ndarray] = None, M: Optional[np.ndarray] = None) -> float:
    """
    (avg|v|^3)^{1/3} + (avg|H|^3)^{1/3} + (avg|p|^{3/2})^{2/3} + (avg|a|^m)^{1/m} + (avg|M|^m)^{1/m}

    a (shape like samples.u) and M (like samples.F) are the divergence-free
    coefficient fields; None stands for zero.
    """
    if not m_exp > 5:
        raise InvalidExponent(f'the smallness condition needs m > 5, got {m_exp}')
    quad = _CylinderQuadrature(samples, cyl)
    total = (quad.mean(_magnitude(quad.ball_values(samples.u), 1) ** 3) ** (1.0 / 3.0)
             + quad.mean(_magnitude(quad.ball_values(samples.F), 2) ** 3) ** (1.0 / 3.0)
             + quad.mean(np.abs(quad.ball_values(samples.p)) ** 1.5) ** (2.0 / 3.0))
    for coefficient, axes, shape in ((a, 1, samples.u.shape), (M, 2, samples.F.shape)):
        if coefficient is None:
            continue
        if coefficient.shape != shape:
            raise ValueError(f'coefficient field must have shape {shape}, got {coefficient.shape}')
        total += quad.mean(_magnitude(quad.ball_values(coefficient), axes) ** m_exp) ** (1.0 / m_exp)
    return total


@dataclass(frozen=True)
class BumpFunction:
    """
    phi(x, t) = psi(|x - x0| / radius) chi(t) with the smooth bump
    psi(s) = exp(1 - 1/(1 - s^2)) on s < 1 and the ramp
    chi(t) = sin^2(pi/2 (t - t_start) / (t_end - t_start)), which vanishes
    with its derivative at t_start.
    """
    x0: tuple
    radius: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.radius <= 0 or self.t_end <= self.t_start:
            raise ValueError('bump needs a positive radius and t_end > t_start')

    def spatial(self, grid: GridSpec) -> np.ndarray:
        offset = grid.coordinates - np.array(self.x0, dtype=float)[:, None, None, None]
        s2 = np.sum(offset ** 2, axis=0) / self.radius ** 2
        out = np.zeros(grid.shape)
        inside = s2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    def ramp(self, t: np.ndarray) -> np.ndarray:
        span = self.t_end - self.t_start
        return np.sin(0.5 * np.pi * (np.asarray(t) - self.t_start) / span) ** 2

    def ramp_rate(self, t: np.ndarray) -> np.ndarray:
        span = self.t_end - self.t_start
        return 0.5 * np.pi / span * np.sin(np.pi * (np.asarray(t) - self.t_start) / span)


def local_energy_residual(samples: SpaceTimeSamples, phi: BumpFunction, sigma: float = 1.0,
                          calc: Optional[CalculusMixin] = None, relative: bool = True) -> float:
    """
    Local energy balance tested against phi, integrated over [t_start, t_end]:

        [int phi e dx]_{t_start}^{t_end} + 2 int int phi (|grad u|^2 + |grad F|^2)
          - int int (phi_t + Delta phi) e + sigma e u.grad phi + 2 p u.grad phi
          - 2 sigma (F F^t) : (u x grad phi)

    with e = |u|^2 + |F|^2. Suitable solutions make this <= 0; smooth ones
    make it vanish. With relative=True the value is divided by the
    dissipation term 2 int int phi (|grad u|^2 + |grad F|^2).
    """
    grid = samples.grid
    times = samples.times
    reach = np.max(np.abs(phi.x0)) + phi.radius
    if reach > grid.half_width - grid.spacing:
        raise SupportViolation(f'bump of radius {phi.radius} at {phi.x0} leaves the box')
    if phi.t_start < times[0] - TIME_TOLERANCE or phi.t_end > times[-1] + TIME_TOLERANCE:
        raise SupportViolation(f'bump time support [{phi.t_start}, {phi.t_end}] outside the samples')
    calc = calc or FourierWorkspace(grid)

    inside = np.flatnonzero((times >= phi.t_start - TIME_TOLERANCE) & (times <= phi.t_end + TIME_TOLERANCE))
    if len(inside) < 2:
        raise SupportViolation('fewer than two sample times inside the bump support')
    weights = _trapezoid_weights(times[inside])

    psi = phi.spatial(grid)
    grad_psi = calc.gradient(psi)
    lap_psi = calc.laplacian(psi)
    h3 = grid.cell_volume

    def energy_density(k):
        return np.sum(samples.u[k] ** 2, axis=0) + np.sum(samples.F[k] ** 2, axis=(0, 1))

    dissipation_term = 0.0
    flux_term = 0.0
    for w, k in zip(weights, inside):
        t = times[k]
        chi, chi_t = float(phi.ramp(t)), float(phi.ramp_rate(t))
        u, F, p = samples.u[k], samples.F[k], samples.p[k]
        e = energy_density(k)
        weighted_grad = np.sum(psi * (np.sum(calc.gradient(u) ** 2, axis=(0, 1))
                                      + np.sum(calc.gradient(F) ** 2, axis=(0, 1, 2))))
        u_dot_grad = np.sum(u * grad_psi, axis=0)
        stress = np.einsum('il...,kl...,i...,k...->...', F, F, u, grad_psi)
        rhs = (chi_t * psi * e + chi * lap_psi * e + sigma * chi * e * u_dot_grad
               + 2.0 * chi * p * u_dot_grad - 2.0 * sigma * chi * stress)
        dissipation_term += w * 2.0 * chi * float(weighted_grad) * h3
        flux_term += w * float(np.sum(rhs)) * h3

    first, last = inside[0], inside[-1]
    boundary = (float(phi.ramp(times[last])) * float(np.sum(psi * energy_density(last)))
                - float(phi.ramp(times[first])) * float(np.sum(psi * energy_density(first)))) * h3
    residual = boundary + dissipation_term - flux_term
    logger.debug(f'local energy: boundary {boundary:.6g}, dissipation {dissipation_term:.6g}, '
                 f'flux {flux_term:.6g}')
    if not relative:
        return residual
    return residual / dissipation_term if dissipation_term > 0 else residual
