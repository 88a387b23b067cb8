"""Checks run on trajectories: energy balance, temporal order, self-similarity"""
from typing import Callable, Optional, Tuple

import numpy as np

from fields.spectral import FourierWorkspace

from .integrator import EvolveResult, EvolveState, project_packed


def energy(state: EvolveState) -> float:
    """1/2 int |u|^2 + |F|^2 over the box"""
    return 0.5 * float(np.sum(state.u.data ** 2) + np.sum(state.F.data ** 2)) * state.grid.cell_volume


def energy_identity_residual(result: EvolveResult) -> float:
    """
    max |dE/dt + D| / max D over interior trajectory points.

    dE/dt is the centred difference of the recorded energies over
    [t_{i-1}, t_{i+1}] and D the dissipation int |grad u|^2 + |grad F|^2
    averaged over the same window by Simpson's rule. Smooth solutions
    satisfy dE/dt = -D exactly; for a heat mode the mismatch is (2|k|^2 dt)^4/180.
    """
    t, E, D = result.column('t'), result.column('energy'), result.column('dissipation')
    if len(t) < 3:
        raise ValueError('energy identity needs at least three trajectory points')
    scale = float(np.max(D))
    if scale == 0.0:
        return 0.0
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    D_mean = (D[:-2] + 4.0 * D[1:-1] + D[2:]) / 6.0
    return float(np.max(np.abs(dEdt + D_mean))) / scale


def smooth_step(r: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 for r <= inner, 0 for r >= outer, C-infinity in between"""
    if not 0.0 <= inner < outer:
        raise ValueError(f'need 0 <= inner < outer, got [{inner}, {outer}]')
    s = np.clip((np.asarray(r) - inner) / (outer - inner), 0.0, 1.0)
    with np.errstate(divide='ignore'):
        rise = np.where(s < 1.0, np.exp(-1.0 / np.where(s < 1.0, 1.0 - s, 1.0)), 0.0)
        fall = np.where(s > 0.0, np.exp(-1.0 / np.where(s > 0.0, s, 1.0)), 0.0)
    return rise / (rise + fall)


def cutoff_state(state: EvolveState, ws: Optional[FourierWorkspace] = None, inner: Optional[float] = None,
                 outer: Optional[float] = None) -> EvolveState:
    """
    The state times smooth_step(|x|; inner, outer) (default L/4 and 3L/4),
    truncated to the dealiased modes and Leray-projected.

    The result is smooth across the box faces, so its periodic evolution obeys
    the energy identity; a profile state decaying like 1/|x| jumps there.
    """
    grid = state.grid
    ws = ws or FourierWorkspace(grid)
    inner = grid.half_width / 4 if inner is None else inner
    outer = 3 * grid.half_width / 4 if outer is None else outer
    if outer > grid.half_width:
        raise ValueError(f'cutoff radius {outer} reaches beyond the box half-width {grid.half_width}')
    chi = smooth_step(grid.radius, inner, outer)
    cut = EvolveState(state.u.with_data(chi * state.u.data), state.F.with_data(chi * state.F.data),
                      state.t, state.sigma)
    w_hat = project_packed(ws.dealias * cut.spectrum(ws), ws)
    return cut.from_spectrum(w_hat, ws, state.t)


def state_difference(a: EvolveState, b: EvolveState, mask: Optional[np.ndarray] = None) -> float:
    """Relative L^2 distance |a - b| / |b| of the packed fields, optionally restricted to a mask"""
    if mask is None:
        mask = np.ones(a.grid.shape, dtype=bool)
    diff = np.sum((a.u.data - b.u.data)[:, mask] ** 2) + np.sum((a.F.data - b.F.data)[:, :, mask] ** 2)
    ref = np.sum(b.u.data[:, mask] ** 2) + np.sum(b.F.data[:, :, mask] ** 2)
    if ref == 0.0:
        return float(np.sqrt(diff))
    return float(np.sqrt(diff / ref))


def temporal_order_ratio(run: Callable[[float], EvolveState], dt: float) -> Tuple[float, float, float]:
    """
    Richardson ratio of successive step halvings.

    run(dt) returns the final state of one evolution. With e1 = |w(dt) - w(dt/2)|
    and e2 = |w(dt/2) - w(dt/4)| the ratio e1/e2 tends to 4 for a second-order
    scheme. Returns (ratio, e1, e2).
    """
    coarse, mid, fine = run(dt), run(0.5 * dt), run(0.25 * dt)
    e1 = state_difference(coarse, mid)
    e2 = state_difference(mid, fine)
    return (e1 / e2 if e2 > 0 else np.inf), e1, e2


def self_similarity_deviation(evolved: EvolveState, predicted: EvolveState,
                              radius: Optional[float] = None) -> float:
    """Relative L^2 deviation over the ball |x| <= radius (default L/2)"""
    grid = evolved.grid
    radius = 0.5 * grid.half_width if radius is None else radius
    return state_difference(evolved, predicted, grid.radius <= radius)
