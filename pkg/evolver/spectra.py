"""Packed spectral state (u_hat, F_hat) and the quadratic terms of the system"""
import numpy as np

from fields.spectral import FourierWorkspace
from profiles.sources import column_fluxes, gram, outer


def pack(u_hat: np.ndarray, F_hat: np.ndarray) -> np.ndarray:
    """Stack to shape (12, ...): u components, then F_ij row-major"""
    return np.concatenate([u_hat, F_hat.reshape((9,) + F_hat.shape[2:])])


def unpack(w_hat: np.ndarray):
    return w_hat[:3], w_hat[3:].reshape((3, 3) + w_hat.shape[1:])


def nonlinear(w_hat: np.ndarray, ws: FourierWorkspace, sigma: float) -> np.ndarray:
    """
    Dealiased spectrum of (P div sigma(F F^t - u x u), div sigma Q_j per column).

    Q_j = F_j x u - u x F_j, so column j of the F term is
    sigma((F_j . grad) u - (u . grad) F_j) for divergence-free fields.
    """
    if sigma == 0.0:
        return np.zeros_like(w_hat)
    u_hat, F_hat = unpack(w_hat)
    u, F = ws.inverse(u_hat), ws.inverse(F_hat)
    flux = sigma * (gram(F) - outer(u, u))
    Q = sigma * column_fluxes(u, F)
    Nu = ws.project_spectrum(ws.divergence_spectrum(ws.forward(flux)))
    NF = np.swapaxes(ws.divergence_spectrum(ws.forward(Q)), 0, 1)
    return ws.dealias * pack(Nu, NF)


def mode_weights(ws: FourierWorkspace) -> np.ndarray:
    """Multiplicity of each rfft mode in the full spectrum"""
    nz = ws.k_squared.shape[-1]
    weights = np.full(nz, 2.0)
    weights[0] = 1.0
    if ws.grid.n % 2 == 0:
        weights[-1] = 1.0
    return weights


def dissipation(w_hat: np.ndarray, ws: FourierWorkspace) -> float:
    """int |grad u|^2 + |grad F|^2 by Parseval"""
    n3 = ws.grid.n ** 3
    power = np.sum(np.abs(w_hat) ** 2, axis=0) * ws.k_squared * mode_weights(ws)
    return float(np.sum(power)) * ws.grid.cell_volume / n3
