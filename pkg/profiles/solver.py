"""
Fixed-point construction of self-similar profiles.

With U = U0 + v_hat and G = G0 + H_hat, the map

    T(v_hat, H_hat; sigma) = (Phi(sigma (G G^t - U x U)),  heat-Duhamel of sigma div Q_j)

is evaluated at t = 1 through the Duhamel engine of the stokes app, with
U(x, s) = s^{-1/2} U(x/sqrt(s)) rebuilt at every quadrature node. Picard
iteration (optionally Anderson-mixed) finds its fixed point; sigma
continuation walks from the linear case sigma = 0 to sigma = 1.
"""
import logging
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lstsq

from caloric.services import CaloricProfile, caloric_profile
from fields.grid import GridSpec
from fields.norms import x_gamma4_norm
from fields.profiles import TensorProfile, VectorProfile
from fields.sampling import ProfileSampler
from fields.spectral import FourierWorkspace, spectral_divergence
from fields.traces import Datum
from stokes.duhamel import DuhamelSchedule, core_floor, duhamel_spectrum, halving_check
from stokes.exceptions import DuhamelQuadratureError

from .exceptions import (AprioriBoundExceeded, ContinuationStalled, DivergenceDetected,
                         FixedPointError, MaxItersExceeded)
from .sources import column_fluxes, gram, outer

logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-10
LARGE_DATUM = 0.2


@dataclass(frozen=True, eq=False)
class ProfileState:
    """Correction (v_hat, H_hat) to the caloric profiles at a given sigma"""
    v_hat: VectorProfile
    H_hat: TensorProfile
    sigma: float
    gamma: float = 0.5

    @classmethod
    def zeros(cls, grid: GridSpec, sigma: float = 0.0, gamma: float = 0.5) -> 'ProfileState':
        return cls(VectorProfile.zeros(grid, gamma), TensorProfile.zeros(grid, gamma), sigma, gamma)

    @property
    def grid(self) -> GridSpec:
        return self.v_hat.grid

    def at_sigma(self, sigma: float) -> 'ProfileState':
        return replace(self, sigma=sigma)

    def norm(self) -> float:
        """||(v_hat, H_hat)||_{X_gamma^4}"""
        return x_gamma4_norm(self.v_hat, self.H_hat, self.gamma)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v_hat.data.ravel(), self.H_hat.data.ravel()])

    def from_vector(self, flat: np.ndarray) -> 'ProfileState':
        split = self.v_hat.data.size
        return replace(
            self,
            v_hat=self.v_hat.with_data(flat[:split].reshape(self.v_hat.data.shape)),
            H_hat=self.H_hat.with_data(flat[split:].reshape(self.H_hat.data.shape)),
        )


def default_damping(c_star: float) -> float:
    return 1.0 if c_star <= LARGE_DATUM else 0.5


@dataclass(frozen=True)
class SolveConfig:
    sigma_schedule: Tuple[float, ...] = (0.0, 0.5, 1.0)
    damping: Optional[float] = None
    tol_fixed_point: float = 1e-8
    max_iters: int = 30
    anderson_depth: int = 0
    norm_ceiling: float = 1e3
    max_bisections: int = 3
    duhamel_tol: Optional[float] = None

    def __post_init__(self):
        schedule = tuple(float(s) for s in self.sigma_schedule)
        object.__setattr__(self, 'sigma_schedule', schedule)
        if not schedule:
            raise ValueError('sigma_schedule must not be empty')
        if any(s < 0.0 or s > 1.0 for s in schedule):
            raise ValueError('sigma_schedule values must lie in [0, 1]')
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ValueError('sigma_schedule must be increasing')
        if self.damping is not None and not 0.0 < self.damping <= 1.0:
            raise ValueError(f'damping must lie in (0, 1], got {self.damping}')
        if self.tol_fixed_point <= 0:
            raise ValueError('tol_fixed_point must be positive')
        if self.max_iters < 1:
            raise ValueError('max_iters must be at least 1')
        if self.anderson_depth < 0:
            raise ValueError('anderson_depth must be nonnegative')
        if self.norm_ceiling <= 0:
            raise ValueError('norm_ceiling must be positive')
        if self.max_bisections < 0:
            raise ValueError('max_bisections must be nonnegative')

    def damping_for(self, c_star: float) -> float:
        return self.damping if self.damping is not None else default_damping(c_star)


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    state: ProfileState
    residual_history: Tuple[float, ...]
    contraction_ratios: Tuple[float, ...]
    converged: bool
    iterations: int
    norm: float = 0.0

    @property
    def sigma(self) -> float:
        return self.state.sigma

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0

    @property
    def relative_residual(self) -> float:
        return self.residual / max(1.0, self.norm)

    @property
    def max_contraction(self) -> float:
        return max(self.contraction_ratios) if self.contraction_ratios else 0.0


@dataclass(frozen=True, eq=False)
class ProfileProblem:
    """Everything T needs besides the iterate: caloric profiles, Duhamel schedule, workspace"""
    U0: CaloricProfile
    G0: CaloricProfile
    schedule: DuhamelSchedule
    ws: FourierWorkspace
    gamma: float = 0.5
    core_cells: Optional[float] = None

    @property
    def grid(self) -> GridSpec:
        return self.U0.grid

    @property
    def c_star(self) -> float:
        return self.U0.c_star + self.G0.c_star

    @cached_property
    def floor(self) -> float:
        return core_floor(self.ws, self.core_cells)

    @cached_property
    def caloric_samplers(self):
        return self.U0.sampler(), self.G0.sampler()

    def zero_state(self, sigma: float = 0.0) -> ProfileState:
        return ProfileState.zeros(self.grid, sigma, self.gamma)

    @classmethod
    def build(cls, datum: Datum, grid: GridSpec, gamma: float = 0.5,
              schedule: Optional[DuhamelSchedule] = None, ws: Optional[FourierWorkspace] = None,
              use_cache: bool = True, core_cells: Optional[float] = None) -> 'ProfileProblem':
        if use_cache:
            from caloric.cache import get_cached_caloric_profile as compute
        else:
            compute = caloric_profile
        U0 = compute(datum.velocity, grid, gamma)
        G0 = compute(datum.deformation, grid, gamma)
        return cls(
            U0=U0,
            G0=G0,
            schedule=schedule or DuhamelSchedule(grid.duhamel_nodes),
            ws=ws or FourierWorkspace(grid),
            gamma=gamma,
            core_cells=core_cells,
        )


def apply_T(state: ProfileState, problem: ProfileProblem,
            tol: Optional[float] = None) -> Tuple[VectorProfile, TensorProfile]:
    """
    One evaluation of the fixed-point map.

    The v part is Leray-projected; H columns are heat-Duhamel integrals of
    sigma div Q_j without projection, divergence-free because each Q_j is
    antisymmetric.

    Raises:
        DuhamelQuadratureError: with tol set, when halving the schedule moves the result
    """
    grid, gamma = problem.grid, state.gamma
    if state.sigma == 0.0:
        return VectorProfile.zeros(grid, gamma), TensorProfile.zeros(grid, gamma)

    U0s, G0s = problem.caloric_samplers
    vs = ProfileSampler(grid, state.v_hat.data, decay=1.0 + gamma)
    Hs = ProfileSampler(grid, state.H_hat.data, decay=1.0 + gamma)
    ws, sigma, floor = problem.ws, state.sigma, problem.floor

    def source_at(s: float) -> np.ndarray:
        s = max(s, floor)
        scale = np.sqrt(s)
        U = (U0s.on_grid(scale) + vs.on_grid(scale)) / scale
        G = (G0s.on_grid(scale) + Hs.on_grid(scale)) / scale
        flux = gram(G) - outer(U, U)
        return sigma * np.concatenate([flux[None], column_fluxes(U, G)])

    def evaluate(schedule: DuhamelSchedule) -> np.ndarray:
        spectrum = duhamel_spectrum(source_at, schedule, ws)
        spectrum[0] = ws.project_spectrum(spectrum[0])
        return ws.inverse(spectrum)

    out = halving_check(evaluate, problem.schedule, tol)
    v_new = VectorProfile(grid, out[0], gamma)
    H_new = TensorProfile(grid, np.stack(list(out[1:]), axis=1), gamma)

    for name, profile in (('v', v_new), ('H', H_new)):
        relative = spectral_divergence(profile, ws).relative
        if relative > DIVERGENCE_TOLERANCE:
            logger.warning(f'apply_T output {name} has relative divergence {relative:.2e}')
    return v_new, H_new


class _AndersonMixer:
    """Type-II Anderson mixing over the last `depth` iterates"""

    def __init__(self, depth: int, damping: float):
        self.damping = damping
        self.iterates = deque(maxlen=depth + 1)
        self.residuals = deque(maxlen=depth + 1)

    def update(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.iterates.append(x)
        self.residuals.append(g)
        step = x + self.damping * g
        if len(self.iterates) < 2:
            return step
        dX = np.stack([b - a for a, b in zip(list(self.iterates), list(self.iterates)[1:])], axis=1)
        dG = np.stack([b - a for a, b in zip(list(self.residuals), list(self.residuals)[1:])], axis=1)
        coefficients = lstsq(dG, g)[0]
        return step - (dX + self.damping * dG) @ coefficients


def _check_divergence_free(state: ProfileState, ws: FourierWorkspace):
    for profile in (state.v_hat, state.H_hat):
        if profile.max_abs() == 0.0:
            continue
        relative = spectral_divergence(profile, ws).relative
        if relative > 1e-8:
            raise ValueError(f'initial state is not divergence-free (relative divergence {relative:.2e})')


def picard_solve(init: ProfileState, problem: ProfileProblem, cfg: SolveConfig) -> FixedPointResult:
    """
    Damped Picard iteration w <- (1 - theta) w + theta T(w), optionally Anderson-mixed.

    Converged means ||w - T(w)||_{X_gamma^4} < tol * max(1, ||w||); the
    returned state is that w. `iterations` counts updates of w.

    Raises:
        MaxItersExceeded: no convergence within cfg.max_iters updates
        DivergenceDetected: the residual grew tenfold over its minimum
        AprioriBoundExceeded: ||w|| passed cfg.norm_ceiling
    """
    _check_divergence_free(init, problem.ws)
    theta = cfg.damping_for(problem.c_star)
    mixer = _AndersonMixer(cfg.anderson_depth, theta)
    sigma = init.sigma

    state = init
    history: List[float] = []
    ratios: List[float] = []
    iterations = 0

    def result(converged: bool, norm: float) -> FixedPointResult:
        return FixedPointResult(state, tuple(history), tuple(ratios), converged, iterations, norm)

    while True:
        v_new, H_new = apply_T(state, problem, cfg.duhamel_tol)
        residual = x_gamma4_norm(state.v_hat - v_new, state.H_hat - H_new, state.gamma)
        if history:
            ratios.append(residual / history[-1] if history[-1] > 0 else 0.0)
        history.append(residual)
        norm = state.norm()
        logger.debug(f'sigma={sigma:.4g} iter={iterations} residual={residual:.3e} norm={norm:.3e}')

        if residual < cfg.tol_fixed_point * max(1.0, norm):
            logger.info(f'sigma={sigma:.4g} converged in {iterations} iterations, '
                        f'residual {residual:.3e}, norm {norm:.4e}')
            return result(True, norm)
        if norm > cfg.norm_ceiling:
            raise AprioriBoundExceeded(
                f'sigma={sigma:.4g}: norm {norm:.3e} exceeds the ceiling {cfg.norm_ceiling:.3e}',
                result(False, norm),
            )
        if residual > 10.0 * min(history):
            raise DivergenceDetected(
                f'sigma={sigma:.4g}: residual {residual:.3e} grew tenfold over {min(history):.3e}',
                result(False, norm),
            )
        if iterations >= cfg.max_iters:
            raise MaxItersExceeded(
                f'sigma={sigma:.4g}: no convergence in {cfg.max_iters} iterations '
                f'(residual {residual:.3e})',
                result(False, norm),
            )

        x = state.as_vector()
        g = np.concatenate([v_new.data.ravel(), H_new.data.ravel()]) - x
        state = state.from_vector(mixer.update(x, g))
        iterations += 1


def sigma_continuation(problem: ProfileProblem, cfg: SolveConfig,
                       init: Optional[ProfileState] = None) -> List[FixedPointResult]:
    """
    Solve along cfg.sigma_schedule, warm-starting every sigma from the last converged state.

    A failing step is bisected towards the last good sigma up to
    cfg.max_bisections times per schedule entry; intermediate solves are
    kept in the results. A Duhamel quadrature failure ends the walk at once.

    Raises:
        ContinuationStalled: carries the last good sigma and every result so far
    """
    state = init or problem.zero_state(cfg.sigma_schedule[0])
    results: List[FixedPointResult] = []
    last_good: Optional[float] = None

    def stalled(sigma: float, error: Exception) -> ContinuationStalled:
        logger.error(f'Continuation stalled at sigma={sigma:.4g}: {error}')
        return ContinuationStalled(
            f'continuation stalled at sigma={sigma:.4g} (last good sigma: {last_good}): {error}',
            last_good_sigma=last_good,
            results=results,
        )

    for target in cfg.sigma_schedule:
        sigma = target
        bisections = 0
        while True:
            try:
                result = picard_solve(state.at_sigma(sigma), problem, cfg)
            except DuhamelQuadratureError as e:
                raise stalled(sigma, e) from e
            except FixedPointError as e:
                if last_good is None or bisections >= cfg.max_bisections:
                    raise stalled(sigma, e) from e
                bisections += 1
                sigma = 0.5 * (last_good + sigma)
                logger.warning(f'Bisecting sigma step to {sigma:.4g} ({bisections}/{cfg.max_bisections})')
                continue

            results.append(result)
            state = result.state
            last_good = sigma
            logger.info(f'sigma={sigma:.4g}: ||(v, H)||={result.norm:.4e} residual={result.residual:.3e} '
                        f'iterations={result.iterations}')
            if sigma == target:
                break
            sigma = target
    return results


def sigma_norms(results: Sequence[FixedPointResult]) -> List[Tuple[float, float, float, int]]:
    """Rows (sigma, norm, residual, iterations) for the per-sigma table"""
    return [(r.sigma, r.norm, r.residual, r.iterations) for r in results]
