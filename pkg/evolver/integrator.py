"""
Mild-solution time stepping of the damped viscoelastic system on the periodic box.

Each step is the trapezoidal exponential integrator

    w(t + dt) = e^{dt Delta} (w + dt/2 N(w)) + dt/2 N(w(t + dt))

with the implicit end-point value found by fixed-point sub-iteration,
the discrete form of the successive iterations that build mild solutions.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from fields.grid import GridSpec
from fields.profiles import ScalarProfile, TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace
from profiles.sources import gram, outer
from stokes.operators import recover_pressure

from .exceptions import EvolverStepError, StepRejected
from .monitor import ContractionMonitor, lebesgue_integral
from .spectra import dissipation, nonlinear, pack, unpack

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ('t', 'energy', 'dissipation', 'u_Lm', 'F_Lm', 'div_u', 'div_F', 'kappa')
DIVERGENCE_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class EvolveState:
    u: VectorProfile
    F: TensorProfile
    t: float
    sigma: float = 1.0

    @classmethod
    def zeros(cls, grid: GridSpec, t: float = 0.0, sigma: float = 1.0) -> 'EvolveState':
        return cls(VectorProfile.zeros(grid), TensorProfile.zeros(grid), t, sigma)

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def spectrum(self, ws: FourierWorkspace) -> np.ndarray:
        return pack(ws.forward(self.u.data), ws.forward(self.F.data))

    def from_spectrum(self, w_hat: np.ndarray, ws: FourierWorkspace, t: float) -> 'EvolveState':
        u_hat, F_hat = unpack(w_hat)
        return replace(self, u=self.u.with_data(ws.inverse(u_hat)), F=self.F.with_data(ws.inverse(F_hat)), t=t)

    def pressure(self, ws: Optional[FourierWorkspace] = None) -> ScalarProfile:
        """p from the Poisson equation, p = Delta^{-1} div div sigma(F F^t - u x u)"""
        flux = self.sigma * (gram(self.F.data) - outer(self.u.data, self.u.data))
        return recover_pressure(TensorProfile(self.grid, flux), ws)


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 0.01
    picard_iters: int = 8
    picard_tol: float = 1e-12
    dt_floor: float = 1e-6
    lebesgue_m: float = 3.0
    window: Optional[float] = None
    trials: int = 3
    seed: int = 0
    monitor: bool = True
    record_every: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f'dt must be positive, got {self.dt}')
        if self.picard_iters < 1:
            raise ValueError('picard_iters must be at least 1')
        if not 0 < self.dt_floor <= self.dt:
            raise ValueError(f'dt_floor must lie in (0, dt], got {self.dt_floor}')
        if self.lebesgue_m < 3:
            raise ValueError(f'lebesgue_m must be at least 3, got {self.lebesgue_m}')
        if self.window is not None and self.window <= 0:
            raise ValueError('window must be positive')
        if self.record_every < 0:
            raise ValueError('record_every must be nonnegative')


def project_packed(w_hat: np.ndarray, ws: FourierWorkspace) -> np.ndarray:
    """Leray projection of u and of every column of F"""
    out = w_hat.copy()
    out[:3] = ws.project_spectrum(w_hat[:3])
    for j in range(3):
        out[3 + j::3] = ws.project_spectrum(w_hat[3 + j::3])
    return out


def divergence_maxima(w_hat: np.ndarray, ws: FourierWorkspace) -> Tuple[float, float]:
    """max |div u| and max over columns of |div F_j|"""
    u_hat, F_hat = unpack(w_hat)
    div_u = ws.inverse(sum(1j * ws.k[i] * u_hat[i] for i in range(3)))
    div_F = ws.inverse(ws.divergence_spectrum(F_hat))
    return float(np.max(np.abs(div_u))), float(np.max(np.abs(div_F)))


def _relative_divergence(w_hat: np.ndarray, ws: FourierWorkspace) -> float:
    scale = float(np.max(np.abs(ws.inverse(w_hat))))
    if scale == 0.0:
        return 0.0
    return max(divergence_maxima(w_hat, ws)) * ws.grid.spacing / scale


def _trapezoid_step(w0: np.ndarray, dt: float, ws: FourierWorkspace, sigma: float,
                    iters: int, tol: float) -> np.ndarray:
    decay = np.exp(-ws.k_squared * dt)
    if sigma == 0.0:
        return w0 * decay
    n0 = nonlinear(w0, ws, sigma)
    base = decay * (w0 + 0.5 * dt * n0)
    current = decay * (w0 + dt * n0)
    change = np.inf
    for it in range(iters):
        new = base + 0.5 * dt * nonlinear(current, ws, sigma)
        scale = max(float(np.max(np.abs(new))), np.finfo(float).tiny)
        change = float(np.max(np.abs(new - current))) / scale
        current = new
        logger.debug(f'sub-iteration {it + 1}: relative change {change:.3e}')
        if change < tol:
            return current
    raise StepRejected(f'sub-iteration stopped at relative change {change:.3e} after {iters} iterations')


def _advance(w0: np.ndarray, t: float, dt: float, ws: FourierWorkspace, sigma: float,
             iters: int, tol: float, dt_floor: float) -> Tuple[np.ndarray, int]:
    """One accepted step of length dt, split into halves while rejected; returns (w, rejections)"""
    try:
        return _trapezoid_step(w0, dt, ws, sigma, iters, tol), 0
    except StepRejected as e:
        half = 0.5 * dt
        if half < dt_floor:
            raise EvolverStepError(f'step at t={t:.6g} failed with dt={dt:.3g} at the floor {dt_floor:.3g}: {e}',
                                   t=t, dt=dt) from e
        logger.warning(f'step rejected at t={t:.6g}, dt={dt:.3g}: {e}; halving')
        mid, first = _advance(w0, t, half, ws, sigma, iters, tol, dt_floor)
        end, second = _advance(mid, t + half, half, ws, sigma, iters, tol, dt_floor)
        return end, 1 + first + second


def evolve_step(state: EvolveState, dt: float, picard_iters: int = 8,
                ws: Optional[FourierWorkspace] = None, tol: float = 1e-12,
                dt_floor: float = 1e-6, monitor: Optional[ContractionMonitor] = None) -> EvolveState:
    """
    Advance a divergence-free state by dt.

    The result is re-projected onto divergence-free u and F columns. A step
    whose sub-iteration does not settle is retried as two half steps, down
    to dt_floor.
    """
    if dt <= 0:
        raise ValueError(f'dt must be positive, got {dt}')
    ws = ws or FourierWorkspace(state.grid)
    w0 = state.spectrum(ws)
    rel = _relative_divergence(w0, ws)
    if rel > DIVERGENCE_TOLERANCE:
        raise ValueError(f'state is not divergence-free (relative divergence {rel:.3e})')

    w1, _ = _advance(w0, state.t, dt, ws, state.sigma, picard_iters, tol, min(dt_floor, dt))
    w1 = project_packed(w1, ws)
    if monitor is not None:
        monitor.observe(state.t + dt, w1)
    return state.from_spectrum(w1, ws, state.t + dt)


@dataclass(eq=False)
class EvolveResult:
    final: EvolveState
    trajectory: np.ndarray
    monitor_history: List[Tuple[float, float]] = field(default_factory=list)
    spacetime_norms: Dict[str, float] = field(default_factory=dict)
    rejected_steps: int = 0
    c0_estimate: float = 0.0
    states: List[EvolveState] = field(default_factory=list)

    columns = TRAJECTORY_COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.trajectory[:, TRAJECTORY_COLUMNS.index(name)]

    def summary(self) -> Dict[str, float]:
        return {
            't_final': float(self.final.t),
            'energy_final': float(self.column('energy')[-1]),
            'u_Linf_Lm': float(np.max(self.column('u_Lm'))),
            'F_Linf_Lm': float(np.max(self.column('F_Lm'))),
            'div_u_max': float(np.max(self.column('div_u'))),
            'div_F_max': float(np.max(self.column('div_F'))),
            'kappa_max': float(np.max(self.column('kappa'))),
            'rejected_steps': int(self.rejected_steps),
            'c0_estimate': float(self.c0_estimate),
            **self.spacetime_norms,
        }


def _trajectory_row(t: float, w_hat: np.ndarray, ws: FourierWorkspace, m: float, kappa: float) -> List[float]:
    w = ws.inverse(w_hat)
    h3 = ws.grid.cell_volume
    div_u, div_F = divergence_maxima(w_hat, ws)
    return [
        t,
        0.5 * float(np.sum(w ** 2)) * h3,
        dissipation(w_hat, ws),
        lebesgue_integral(w[:3], m, h3) ** (1.0 / m),
        lebesgue_integral(w[3:], m, h3) ** (1.0 / m),
        div_u,
        div_F,
        kappa,
    ]


def evolve(init: EvolveState, t0: float, t1: float, cfg: Optional[EvolveConfig] = None,
           ws: Optional[FourierWorkspace] = None, project_initial: bool = True) -> EvolveResult:
    """
    Evolve from t0 to t1 with a uniform step no larger than cfg.dt.

    The initial state is Leray-projected first (a reconstructed profile is
    divergence-free in R^3 but not exactly on the periodic box). The
    trajectory holds one row per accepted step in TRAJECTORY_COLUMNS order;
    spacetime_norms carry the L^{5m/3} norms of u and F over [t0, t1]. With
    cfg.record_every = k > 0 every k-th state (the first included) is kept.
    """
    cfg = cfg or EvolveConfig()
    if not t1 > t0 >= 0:
        raise ValueError(f'need t1 > t0 >= 0, got t0={t0}, t1={t1}')
    ws = ws or FourierWorkspace(init.grid)
    steps = max(1, math.ceil((t1 - t0) / cfg.dt - 1e-9))
    dt = (t1 - t0) / steps
    m, p = cfg.lebesgue_m, 5.0 * cfg.lebesgue_m / 3.0
    h3 = ws.grid.cell_volume

    w = init.spectrum(ws)
    if project_initial:
        w = project_packed(w, ws)
    state = init.from_spectrum(w, ws, t0)

    monitor = None
    if cfg.monitor:
        monitor = ContractionMonitor(ws, cfg.window or (t1 - t0), m=m, sigma=init.sigma,
                                     trials=cfg.trials, seed=cfg.seed)
        monitor.observe(t0, w)

    def spacetime_parts(w_hat):
        phys = ws.inverse(w_hat)
        return lebesgue_integral(phys[:3], p, h3), lebesgue_integral(phys[3:], p, h3)

    rows = [_trajectory_row(t0, w, ws, m, monitor.kappa if monitor else 0.0)]
    states = [state] if cfg.record_every else []
    prev_parts = spacetime_parts(w)
    integrals = [0.0, 0.0]
    rejected = 0
    logger.info(f'Evolving sigma={init.sigma} from t={t0} to t={t1} in {steps} steps of {dt:.4g}')

    for k in range(steps):
        t = t0 + k * dt
        w, count = _advance(w, t, dt, ws, init.sigma, cfg.picard_iters, cfg.picard_tol, min(cfg.dt_floor, dt))
        w = project_packed(w, ws)
        rejected += count
        t_new = t0 + (k + 1) * dt
        kappa = monitor.observe(t_new, w) if monitor else 0.0
        parts = spacetime_parts(w)
        integrals = [integrals[i] + 0.5 * dt * (parts[i] + prev_parts[i]) for i in range(2)]
        prev_parts = parts
        rows.append(_trajectory_row(t_new, w, ws, m, kappa))
        if cfg.record_every and (k + 1) % cfg.record_every == 0:
            states.append(state.from_spectrum(w, ws, t_new))

    final = state.from_spectrum(w, ws, t1)
    result = EvolveResult(
        final=final,
        trajectory=np.array(rows),
        monitor_history=list(monitor.history) if monitor else [],
        spacetime_norms={'u_L5m3': integrals[0] ** (1.0 / p), 'F_L5m3': integrals[1] ** (1.0 / p)},
        rejected_steps=rejected,
        c0_estimate=monitor.c0_estimate if monitor else 0.0,
        states=states,
    )
    logger.info(f'Evolution done: energy {rows[0][1]:.6g} -> {rows[-1][1]:.6g}, '
                f'{rejected} rejected steps')
    return result
