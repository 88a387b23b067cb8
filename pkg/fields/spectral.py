from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.fft

from .calculus import CalculusMixin, DivergenceSummary
from .grid import GridSpec
from .profiles import TensorProfile, VectorProfile


class FourierWorkspace(CalculusMixin):
    """
    Wavenumbers and transforms for the periodic box of period 2L.

    First-derivative wavenumbers have the Nyquist mode zeroed so that odd
    derivatives of real fields stay real; the projection uses the same
    wavenumbers, which keeps divergence of projected fields at round-off.
    The heat multiplier uses the full |k|^2.
    """

    def __init__(self, grid: GridSpec, dealias_fraction: float = 1.0 / 3.0,
                 workers: Optional[int] = None):
        if not 0.0 <= dealias_fraction < 1.0:
            raise ValueError(f'dealias_fraction must lie in [0, 1), got {dealias_fraction}')
        self.grid = grid
        self.dealias_fraction = dealias_fraction
        self.workers = workers

        n, h = grid.n, grid.spacing
        k_full = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        kr_full = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        k_deriv = k_full.copy()
        k_deriv[n // 2] = 0.0
        kr_deriv = kr_full.copy()
        kr_deriv[-1] = 0.0

        self.wavenumbers = (k_full, k_full, kr_full)
        self.k = (k_deriv[:, None, None], k_deriv[None, :, None], kr_deriv[None, None, :])
        self.k_squared = (k_full[:, None, None] ** 2 + k_full[None, :, None] ** 2
                          + kr_full[None, None, :] ** 2)
        self.kd_squared = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2

        k_max = np.pi / h
        keep = (1.0 - dealias_fraction) * k_max
        self.dealias = ((np.abs(k_full)[:, None, None] < keep)
                        & (np.abs(k_full)[None, :, None] < keep)
                        & (np.abs(kr_full)[None, None, :] < keep))

    # transforms over the last three axes

    def forward(self, data: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(data, axes=(-3, -2, -1), workers=self.workers)

    def inverse(self, spectrum: np.ndarray) -> np.ndarray:
        return scipy.fft.irfftn(spectrum, s=self.grid.shape, axes=(-3, -2, -1), workers=self.workers)

    @cached_property
    def _inv_kd_squared(self) -> np.ndarray:
        out = np.zeros_like(self.kd_squared)
        nonzero = self.kd_squared > 0
        out[nonzero] = 1.0 / self.kd_squared[nonzero]
        return out

    # spectral-space operators

    def project_spectrum(self, vector_hat: np.ndarray) -> np.ndarray:
        """Leray multiplier I - k k^T/|k|^2 on axis -4; modes with k = 0 pass through"""
        k_dot = sum(self.k[i] * vector_hat[..., i, :, :, :] for i in range(3)) * self._inv_kd_squared
        return np.stack([vector_hat[..., i, :, :, :] - self.k[i] * k_dot for i in range(3)], axis=-4)

    def divergence_spectrum(self, tensor_hat: np.ndarray) -> np.ndarray:
        """Spectrum of (div f)_j = d_k f_kj, tensor axes at -5 and -4"""
        return np.stack([
            sum(1j * self.k[k] * tensor_hat[..., k, j, :, :, :] for k in range(3)) for j in range(3)
        ], axis=-4)

    def heat_spectrum(self, spectrum: np.ndarray, duration: float) -> np.ndarray:
        return spectrum * np.exp(-self.k_squared * duration)

    def inverse_laplacian_divdiv_spectrum(self, tensor_hat: np.ndarray) -> np.ndarray:
        """Delta^{-1} div div f, i.e. multiplier k^T f k / |k|^2, zero mode set to 0"""
        quad = sum(self.k[i] * self.k[j] * tensor_hat[i, j] for i in range(3) for j in range(3))
        return quad * self._inv_kd_squared

    # real-space calculus

    def derivative(self, field: np.ndarray, axis: int) -> np.ndarray:
        return self.inverse(1j * self.k[axis] * self.forward(field))

    def laplacian(self, field: np.ndarray) -> np.ndarray:
        return self.inverse(-self.k_squared * self.forward(field))

    def apply_dealias(self, field: np.ndarray) -> np.ndarray:
        return self.inverse(self.dealias * self.forward(field))


def spectral_divergence(field: Union[VectorProfile, TensorProfile],
                        ws: Optional[FourierWorkspace] = None) -> DivergenceSummary:
    """
    Divergence by Fourier differentiation on the box.

    For a tensor profile the divergence of each column is returned
    (samples of shape (3, n, n, n), entry j = div of column j).

    relative is max|div| * h / max|field|, a resolution-free ratio.
    """
    ws = ws or FourierWorkspace(field.grid)
    if field.rank == 1:
        samples = ws.divergence(field.data)
    else:
        samples = np.stack([ws.divergence(field.data[:, j]) for j in range(3)])
    max_abs = float(np.max(np.abs(samples)))
    scale = field.max_abs()
    relative = max_abs * field.grid.spacing / scale if scale > 0 else 0.0
    return DivergenceSummary(samples=samples, max_abs=max_abs, relative=relative)
