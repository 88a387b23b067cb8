"""
Duhamel integral for self-similar sources.

A source f(x, s) = s^{-1} f_hat(x/sqrt(s)) drives

    (Phi f)(., 1) = int_0^1 e^{(1-s) Delta} P div f(., s) ds.

With s = tau^2 the integrand picks up the factor 2 tau, which tames the
s -> 0 end; tau runs over Gauss-Legendre nodes on (0, 1). Every node is
accumulated in Fourier space in schedule order and inverted once.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from fields.profiles import TensorProfile, VectorProfile
from fields.sampling import ProfileSampler
from fields.spectral import FourierWorkspace
from selfsim.conf import default, setting

from .exceptions import DuhamelQuadratureError

logger = logging.getLogger(__name__)

SourceAt = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class DuhamelSchedule:
    """Nodes s_k = tau_k^2 and weights 2 tau_k w_k for int_0^1 ds"""
    n_nodes: int = 64
    substitution: str = 'square'

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f'n_nodes must be positive, got {self.n_nodes}')
        if self.substitution not in ('square', 'none'):
            raise ValueError(f'unknown substitution {self.substitution!r}')

    @cached_property
    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        mu, w = np.polynomial.legendre.leggauss(self.n_nodes)
        tau, w = 0.5 * (mu + 1.0), 0.5 * w
        if self.substitution == 'none':
            return tau, w
        return tau ** 2, 2.0 * tau * w

    @property
    def nodes(self) -> np.ndarray:
        return self._table[0]

    @property
    def weights(self) -> np.ndarray:
        return self._table[1]

    def pairs(self) -> Iterator[Tuple[float, float]]:
        for s, w in zip(self.nodes, self.weights):
            yield float(s), float(w)

    def halved(self) -> 'DuhamelSchedule':
        return DuhamelSchedule(max(1, self.n_nodes // 2), self.substitution)

    @classmethod
    def default(cls) -> 'DuhamelSchedule':
        return cls(int(default('duhamel_nodes', 64)))


def core_floor(ws: FourierWorkspace, core_cells: Optional[float] = None) -> float:
    """Smallest source time whose core sqrt(s) the grid can sample"""
    if core_cells is None:
        core_cells = setting('SELFSIM_CORE_CELLS', 1.0)
    return (core_cells * ws.grid.spacing) ** 2


def duhamel_spectrum(source_at: SourceAt, schedule: DuhamelSchedule, ws: FourierWorkspace) -> np.ndarray:
    """
    sum_k w_k e^{(1 - s_k) Delta} div f(., s_k), in Fourier space.

    Args:
        source_at: s -> samples of f(., s), shape batch + (3, 3) + grid shape

    Returns:
        spectrum of shape batch + (3,) + rfft grid shape
    """
    total = None
    for s, w in schedule.pairs():
        div_hat = ws.divergence_spectrum(ws.forward(source_at(s)))
        term = w * ws.heat_spectrum(div_hat, 1.0 - s)
        total = term if total is None else total + term
    return total


def duhamel_profile(
    source_at: SourceAt,
    schedule: DuhamelSchedule,
    ws: FourierWorkspace,
    project: bool = True,
) -> np.ndarray:
    """Real-space duhamel_spectrum, Leray-projected unless project is False"""
    total = duhamel_spectrum(source_at, schedule, ws)
    if project:
        total = ws.project_spectrum(total)
    return ws.inverse(total)


def halving_check(
    evaluate: Callable[[DuhamelSchedule], np.ndarray],
    schedule: DuhamelSchedule,
    tol: Optional[float] = None,
) -> np.ndarray:
    """
    evaluate(schedule), compared against evaluate(schedule.halved()) when tol is set.

    Raises:
        DuhamelQuadratureError: max|full - half| > tol * max|full|
    """
    full = evaluate(schedule)
    if tol is None:
        return full
    half = evaluate(schedule.halved())
    scale = float(np.max(np.abs(full)))
    change = float(np.max(np.abs(full - half)))
    logger.debug(f'Duhamel halving change {change:.3e} (scale {scale:.3e}, {schedule.n_nodes} nodes)')
    if change > tol * scale:
        raise DuhamelQuadratureError(
            f'halving the Duhamel schedule from {schedule.n_nodes} nodes changed the result by '
            f'{change:.3e} > {tol:.1e} * {scale:.3e}',
            change=change,
            n_nodes=schedule.n_nodes,
        )
    return full


def rescaled_source(source_hat: TensorProfile, decay: float, floor: float) -> SourceAt:
    """s -> s^{-1} f_hat(x/sqrt(s)) with s raised to the core floor"""
    sampler = ProfileSampler(source_hat.grid, source_hat.data, decay)

    def source_at(s: float) -> np.ndarray:
        s = max(s, floor)
        return sampler.on_grid(np.sqrt(s)) / s

    return source_at


def phi_profile(
    source_hat: TensorProfile,
    sched: Optional[DuhamelSchedule] = None,
    ws: Optional[FourierWorkspace] = None,
    decay: Optional[float] = None,
    tol: Optional[float] = None,
    core_cells: Optional[float] = None,
) -> VectorProfile:
    """
    (Phi f)(., 1) for f(x, s) = s^{-1} f_hat(x/sqrt(s)).

    Outside the box f_hat is continued by <y>^{-decay}, decay defaulting
    to 2 + 2 gamma. The result is divergence-free through the projection.
    """
    ws = ws or FourierWorkspace(source_hat.grid)
    sched = sched or DuhamelSchedule.default()
    decay = 2.0 + 2.0 * source_hat.gamma if decay is None else decay
    source_at = rescaled_source(source_hat, decay, core_floor(ws, core_cells))
    data = halving_check(lambda schedule: duhamel_profile(source_at, schedule, ws), sched, tol)
    return VectorProfile(source_hat.grid, data, source_hat.gamma)
