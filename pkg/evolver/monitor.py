import logging
from typing import List, Optional, Tuple

import numpy as np

from fields.spectral import FourierWorkspace

from .spectra import nonlinear

logger = logging.getLogger(__name__)


def lebesgue_integral(data: np.ndarray, p: float, cell_volume: float, components: int = 3) -> float:
    """int |f|^p dx for a field whose first `components` axes index components"""
    lead = tuple(range(data.ndim - 3))
    magnitude = np.sqrt(np.sum(data ** 2, axis=lead)) if lead else np.abs(data)
    return float(np.sum(magnitude ** p)) * cell_volume


def spacetime_norm(samples: List[np.ndarray], times: np.ndarray, p: float, cell_volume: float) -> float:
    """L^p norm over space-time from snapshots, trapezoid in time"""
    if len(samples) < 2:
        return 0.0
    values = np.array([lebesgue_integral(s, p, cell_volume) for s in samples])
    return _trapezoid(values, np.asarray(times)) ** (1.0 / p)


class ContractionMonitor:
    """
    Smallness of the linear part of the mild solution.

    kappa = ||u1||_{L^{5m/3}} + ||F1||_{L^{5m/3}} over the current window,
    where (u1, F1) is the heat evolution of the state at the window start.
    Picard iteration for the mild solution contracts when
    kappa < 1/(4 C0); C0 is not explicit, so it is estimated from trial
    fields as max ||B(w, w)|| / ||w||^2, B being the Duhamel integral of the
    quadratic terms over one window.
    """

    def __init__(self, ws: FourierWorkspace, window: float, m: float = 3.0, sigma: float = 1.0,
                 trials: int = 3, seed: int = 0, samples: int = 6):
        if m < 3:
            raise ValueError(f'm must be at least 3, got {m}')
        if window <= 0:
            raise ValueError(f'window must be positive, got {window}')
        self.ws = ws
        self.window = window
        self.m = m
        self.p = 5.0 * m / 3.0
        self.sigma = sigma
        self.samples = samples
        self.c0_estimate = self.estimate_c0(trials, seed) if sigma != 0.0 else 0.0
        self.kappa = 0.0
        self.alarm = False
        self.history: List[Tuple[float, float]] = []
        self._start: Optional[Tuple[float, np.ndarray]] = None
        self._integrals = (0.0, 0.0)
        self._last: Optional[Tuple[float, float, float]] = None

    @property
    def threshold(self) -> float:
        return np.inf if self.c0_estimate == 0.0 else 1.0 / (4.0 * self.c0_estimate)

    def _norm_parts(self, w_hat: np.ndarray) -> Tuple[float, float]:
        w = self.ws.inverse(w_hat)
        h3 = self.ws.grid.cell_volume
        return (lebesgue_integral(w[:3], self.p, h3), lebesgue_integral(w[3:], self.p, h3))

    def _trial_field(self, rng: np.random.Generator) -> np.ndarray:
        ws = self.ws
        spectrum = ws.forward(rng.standard_normal((12,) + ws.grid.shape))
        low = ws.k_squared <= (3.0 * np.pi / ws.grid.half_width) ** 2
        spectrum = spectrum * low
        spectrum[:3] = ws.project_spectrum(spectrum[:3])
        for j in range(3):
            column = spectrum[3 + j::3]
            spectrum[3 + j::3] = ws.project_spectrum(column)
        return spectrum

    def estimate_c0(self, trials: int, seed: int) -> float:
        ws = self.ws
        times = np.linspace(0.0, self.window, self.samples)
        estimate = 0.0
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            w0 = self._trial_field(rng)
            linear = [ws.heat_spectrum(w0, t) for t in times]
            forcing = [nonlinear(w, ws, self.sigma) for w in linear]
            duhamel = []
            for i, t in enumerate(times):
                if i == 0:
                    duhamel.append(np.zeros_like(w0))
                    continue
                terms = [ws.heat_spectrum(forcing[k], t - times[k]) for k in range(i + 1)]
                step = times[1] - times[0]
                duhamel.append(step * (sum(terms) - 0.5 * (terms[0] + terms[-1])))
            num = self._spacetime([ws.inverse(d) for d in duhamel], times)
            den = self._spacetime([ws.inverse(w) for w in linear], times)
            if den > 0:
                estimate = max(estimate, num / den ** 2)
        logger.info(f'Contraction monitor: C0 estimate {estimate:.4g} from {trials} trials')
        return estimate

    def _spacetime(self, fields: List[np.ndarray], times: np.ndarray) -> float:
        h3 = self.ws.grid.cell_volume
        u = np.array([lebesgue_integral(f[:3], self.p, h3) for f in fields])
        F = np.array([lebesgue_integral(f[3:], self.p, h3) for f in fields])
        return _trapezoid(u, times) ** (1.0 / self.p) + _trapezoid(F, times) ** (1.0 / self.p)

    def observe(self, t: float, w_hat: np.ndarray) -> float:
        """Account for time t; w_hat is the packed state at t, used when a window starts"""
        if self._start is None or t - self._start[0] > self.window * (1 + 1e-12):
            self._start = (t, w_hat.copy())
            self._integrals = (0.0, 0.0)
            self._last = None

        t_start, w_start = self._start
        u_part, F_part = self._norm_parts(self.ws.heat_spectrum(w_start, t - t_start))
        if self._last is not None:
            t_prev, u_prev, F_prev = self._last
            dt = t - t_prev
            self._integrals = (self._integrals[0] + 0.5 * dt * (u_part + u_prev),
                               self._integrals[1] + 0.5 * dt * (F_part + F_prev))
        self._last = (t, u_part, F_part)

        self.kappa = self._integrals[0] ** (1.0 / self.p) + self._integrals[1] ** (1.0 / self.p)
        self.history.append((t, self.kappa))
        if self.kappa >= self.threshold and not self.alarm:
            self.alarm = True
            logger.warning(f'kappa={self.kappa:.4g} reached 1/(4 C0)={self.threshold:.4g} at t={t:.4g}; '
                           f'the mild-solution contraction is no longer guaranteed')
        return self.kappa


def _trapezoid(values: np.ndarray, times: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))
