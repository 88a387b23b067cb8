"""
Acceptance diagnostics of a profile solution.

verify_solution checks the profile against the profile PDE, its
divergence and far-field decay, then evolves the reconstructed solution
in time and measures self-similarity, the energy identity and the local
regularity functionals along the trajectory.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from evolver.analysis import cutoff_state, energy_identity_residual, self_similarity_deviation
from evolver.integrator import EvolveConfig, evolve
from fields.spectral import FourierWorkspace, spectral_divergence
from profiles.solver import ProfileProblem, ProfileState

from .decay import decay_exponent_fit
from .exceptions import DiagnosticsError
from .reconstruct import reconstruct_state
from .report import DiagnosticsReport
from .residuals import profile_residual
from .spacetime import (BumpFunction, ParabolicCylinder, SpaceTimeSamples, epsilon_regularity_Y,
                        local_energy_residual, smallness_condition)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerifyThresholds:
    profile_residual: float = 1e-3
    divergence: float = 1e-10
    self_similarity: float = 2e-2
    energy_identity: float = 1e-2
    local_energy_slack: float = 1e-3
    smallness_exponent: float = 6.0
    cylinder_radii: Tuple[float, ...] = (0.5, 1.0)


def verify_solution(problem: ProfileProblem, state: ProfileState, evolve_cfg: Optional[EvolveConfig] = None,
                    t0: float = 1.0, t1: float = 2.0,
                    thresholds: Optional[VerifyThresholds] = None) -> DiagnosticsReport:
    """
    Run every diagnostic on a converged (v_hat, H_hat) at state.sigma.

    The evolution runs from t0 to t1 with evolve_cfg (its record_every
    is forced to 1 so that the space-time functionals see every step).
    The energy identity is measured on a second run started from the
    cut-off reconstructed state, see cutoff_state.
    """
    limits = thresholds or VerifyThresholds()
    cfg = replace(evolve_cfg or EvolveConfig(), record_every=1)
    sigma = state.sigma
    grid = problem.grid
    ws = problem.ws or FourierWorkspace(grid)
    passes = {}

    residual = profile_residual(state.v_hat, state.H_hat, problem.U0, problem.G0, sigma)
    blocks = {name: summary.max_abs for name, summary in residual.items()}
    passes['profile_residual'] = max(blocks.values()) < limits.profile_residual

    divergence = {'v_hat': spectral_divergence(state.v_hat, ws).relative,
                  'H_hat': spectral_divergence(state.H_hat, ws).relative}
    passes['divergence'] = max(divergence.values()) < limits.divergence

    decay = None
    if state.v_hat.max_abs() > 0.0:
        decay = decay_exponent_fit(state.v_hat, state.gamma)
        passes['decay'] = decay.passed

    start = reconstruct_state(state.v_hat, state.H_hat, problem.U0, problem.G0, t0, sigma)
    result = evolve(start, t0, t1, cfg, ws)
    predicted = reconstruct_state(state.v_hat, state.H_hat, problem.U0, problem.G0, t1, sigma)
    similarity = self_similarity_deviation(result.final, predicted)
    passes['self_similarity'] = similarity < limits.self_similarity
    energy_run = evolve(cutoff_state(start, ws), t0, t1, replace(cfg, record_every=0, monitor=False), ws)
    energy_residual = energy_identity_residual(energy_run)
    passes['energy_identity'] = energy_residual < limits.energy_identity

    samples = SpaceTimeSamples.from_states(result.states, ws)
    span = t1 - t0
    Y_values = []
    for radius in limits.cylinder_radii:
        if radius ** 2 > span:
            logger.warning(f'cylinder radius {radius} needs a time span of {radius ** 2}; skipped')
            continue
        Y_values.append((radius, epsilon_regularity_Y(samples, ParabolicCylinder((0, 0, 0), t1, radius))))
    if not Y_values:
        raise DiagnosticsError(f'no cylinder fits into the time span {span}')
    largest = ParabolicCylinder((0, 0, 0), t1, Y_values[-1][0])
    smallness = smallness_condition(samples, largest, limits.smallness_exponent)

    bump = BumpFunction((0.0, 0.0, 0.0), grid.half_width / 4, t0, t1)
    local_energy = local_energy_residual(samples, bump, sigma, ws)
    passes['local_energy'] = local_energy <= limits.local_energy_slack

    report = DiagnosticsReport(
        profile_residual=blocks,
        energy_residual=energy_residual,
        Y_values=tuple(Y_values),
        smallness_lhs=smallness,
        local_energy=local_energy,
        decay_fit=decay,
        self_similarity_error=similarity,
        divergence=divergence,
        passes=passes,
    )
    failed = [name for name, ok in passes.items() if not ok]
    if failed:
        logger.warning(f'Diagnostics failed: {", ".join(failed)}')
    else:
        logger.info('All diagnostics passed')
    return report
