"""
Pipeline runner behind `manage.py pipeline`.

Each subcommand writes its artifacts into the output directory and closes
with `<subcommand>.manifest.json` listing every one of them. solve-profile
leaves v_hat.ssvf and H_hat.ssvf behind; evolve and verify pick those up
from the same directory.
"""
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import django
import numpy as np
import scipy
import scipy.fft
import yaml
from django.core.serializers.json import DjangoJSONEncoder
from django.db import DatabaseError, connection
from django.utils import timezone

import selfsim
from caloric.cache import get_cached_caloric_profile
from caloric.services import caloric_residual
from diagnostics.decay import radial_decay_table
from diagnostics.reconstruct import reconstruct_state
from diagnostics.suite import verify_solution
from evolver.analysis import self_similarity_deviation
from evolver.integrator import TRAJECTORY_COLUMNS, evolve
from fields.dumps import read_profile, write_profile
from fields.exceptions import DumpFormatError
from fields.traces import SphericalRule, build_datum
from profiles.exceptions import ContinuationStalled
from profiles.solver import FixedPointResult, ProfileProblem, ProfileState, sigma_continuation, sigma_norms
from selfsim.conf import setting

from .config import RunConfig, emit_config
from .exceptions import AcceptanceFailed, UnreadableConfig

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('caloric', 'solve-profile', 'evolve', 'verify', 'sweep-sigma')

SIGMA_COLUMNS = ('sigma', 'norm', 'residual', 'iters')
SWEEP_COLUMNS = SIGMA_COLUMNS + ('relative_residual', 'max_contraction')
CALORIC_COLUMNS = ('c_star', 'error_estimate', 'residual', 'decay_ratio')

PROFILE_DUMPS = ('v_hat.ssvf', 'H_hat.ssvf')


@dataclass
class PipelineOutcome:
    subcommand: str
    status: str
    output_dir: Path
    config_hash: str
    metrics: Dict[str, object] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)
    wall_time: float = 0.0
    manifest: Optional[Path] = None

    @property
    def passed(self) -> bool:
        return self.status == 'passed'


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> Dict[str, str]:
    return {
        'selfsim': selfsim.__version__,
        'django': django.get_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pyyaml': yaml.__version__,
    }


def write_table(path: Path, columns: Sequence[str], rows) -> Path:
    """CSV with a header line, every number at full double precision"""
    data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    np.savetxt(path, data, fmt='%.17g', delimiter=',', header=','.join(columns), comments='')
    return path


class _Run:
    """Artifacts and metrics of one subcommand run"""

    def __init__(self, cfg: RunConfig, subcommand: str, out: Path):
        self.cfg = cfg
        self.subcommand = subcommand
        self.out = out
        self.artifacts: List[Path] = []
        self.metrics: Dict[str, object] = {}

    def path(self, name: str) -> Path:
        path = self.out / name
        self.artifacts.append(path)
        return path

    def table(self, name: str, columns: Sequence[str], rows) -> Path:
        return write_table(self.path(name), columns, rows)

    def dump(self, name: str, profile) -> Path:
        return write_profile(self.path(name), profile)

    def text(self, name: str, content: str) -> Path:
        path = self.path(name)
        path.write_text(content)
        return path


def _problem(cfg: RunConfig) -> ProfileProblem:
    datum = build_datum(cfg.datum, SphericalRule.for_grid(cfg.grid))
    return ProfileProblem.build(datum, cfg.grid, cfg.gamma)


def _load_state(cfg: RunConfig, out: Path, required: bool = True) -> ProfileState:
    paths = [out / name for name in PROFILE_DUMPS]
    if not all(p.exists() for p in paths):
        if required:
            raise UnreadableConfig(f'no profile dumps in {out}; run solve-profile with the same --out first')
        logger.info(f'No profile dumps in {out}, starting from the caloric profiles alone')
        return ProfileState.zeros(cfg.grid, cfg.sigma, cfg.gamma)
    try:
        v_hat, H_hat = (read_profile(p, cfg.grid, cfg.gamma) for p in paths)
    except DumpFormatError as e:
        raise UnreadableConfig(f'cannot load profile dumps from {out}: {e}') from e
    return ProfileState(v_hat, H_hat, cfg.sigma, cfg.gamma)


def _caloric(run: _Run):
    cfg = run.cfg
    datum = build_datum(cfg.datum, SphericalRule.for_grid(cfg.grid))
    rows = []
    for name, trace in (('U0', datum.velocity), ('G0', datum.deformation)):
        profile = get_cached_caloric_profile(trace, cfg.grid, cfg.gamma)
        residual = caloric_residual(profile)
        run.dump(f'caloric_{name}.ssvf', profile.field)
        rows.append((profile.c_star, profile.error_estimate, residual, profile.decay_ratio()))
        run.metrics[f'{name}_residual'] = residual
        run.metrics[f'{name}_error_estimate'] = profile.error_estimate
    run.table('caloric.csv', CALORIC_COLUMNS, rows)


def _continuation(run: _Run) -> List[FixedPointResult]:
    problem = _problem(run.cfg)
    try:
        return sigma_continuation(problem, run.cfg.solve)
    except ContinuationStalled as e:
        run.metrics['last_good_sigma'] = e.last_good_sigma
        run.table('sigma_norms.csv', SIGMA_COLUMNS, sigma_norms(e.results))
        raise


def _solve_profile(run: _Run):
    results = _continuation(run)
    final = results[-1]
    run.table('sigma_norms.csv', SIGMA_COLUMNS, sigma_norms(results))
    run.dump(PROFILE_DUMPS[0], final.state.v_hat)
    run.dump(PROFILE_DUMPS[1], final.state.H_hat)
    run.metrics.update(
        sigma=final.sigma,
        norm=final.norm,
        residual=final.residual,
        relative_residual=final.relative_residual,
        iterations=final.iterations,
        max_contraction=final.max_contraction,
    )


def _sweep_sigma(run: _Run):
    results = _continuation(run)
    rows = []
    for index, result in enumerate(results):
        rows.append((result.sigma, result.norm, result.residual, result.iterations,
                     result.relative_residual, result.max_contraction))
        run.dump(f'v_hat_{index:03d}.ssvf', result.state.v_hat)
        run.dump(f'H_hat_{index:03d}.ssvf', result.state.H_hat)
    run.table('sigma_sweep.csv', SWEEP_COLUMNS, rows)
    run.metrics.update(solves=len(results), sigma_final=results[-1].sigma, norm_final=results[-1].norm)


def _evolve(run: _Run):
    cfg = run.cfg
    problem = _problem(cfg)
    state = _load_state(cfg, run.out, required=False)
    args = (state.v_hat, state.H_hat, problem.U0, problem.G0)
    start = reconstruct_state(*args, cfg.t0, cfg.sigma)
    result = evolve(start, cfg.t0, cfg.t1, replace(cfg.evolve, record_every=0), problem.ws)
    predicted = reconstruct_state(*args, cfg.t1, cfg.sigma)

    run.table('trajectory.csv', TRAJECTORY_COLUMNS, result.trajectory)
    run.dump('u_final.ssvf', result.final.u)
    run.dump('F_final.ssvf', result.final.F)
    run.metrics.update(result.summary())
    run.metrics['self_similarity_error'] = self_similarity_deviation(result.final, predicted)


def _verify(run: _Run):
    cfg = run.cfg
    state = _load_state(cfg, run.out)
    problem = _problem(cfg)
    report = verify_solution(problem, state, cfg.evolve, cfg.t0, cfg.t1)

    run.text('report.txt', report.as_text())
    path = run.path('report.csv')
    np.savetxt(path, np.array(report.as_rows(), dtype=object).reshape(-1, 2), fmt='%s', delimiter=',',
               header='key,value', comments='')
    run.table('radial_decay.csv', ('bracket', 'sup'), radial_decay_table(state.v_hat))
    run.metrics.update(report.flat())

    failed = [name for name, ok in report.passes.items() if not ok]
    if failed:
        raise AcceptanceFailed(f'diagnostics failed: {", ".join(failed)}', failed)


RUNNERS = {
    'caloric': _caloric,
    'solve-profile': _solve_profile,
    'evolve': _evolve,
    'verify': _verify,
    'sweep-sigma': _sweep_sigma,
}


def _write_manifest(run: _Run, digest: str, status: str, wall_time: float, started,
                    error: str = '') -> Path:
    manifest = {
        'subcommand': run.subcommand,
        'config_hash': digest,
        'config': emit_config(run.cfg),
        'versions': versions(),
        'seed': run.cfg.seed,
        'workers': run.cfg.workers,
        'started_at': started,
        'wall_time': wall_time,
        'status': status,
        'error': error,
        'metrics': run.metrics,
        'artifacts': [
            {'path': p.name, 'sha256': file_digest(p)} for p in run.artifacts if p.exists()
        ],
    }
    path = run.out / f'{run.subcommand}.manifest.json'
    path.write_text(json.dumps(manifest, cls=DjangoJSONEncoder, indent=2, sort_keys=True))
    return path


def _record(outcome: PipelineOutcome, cfg: RunConfig, error: str):
    if not setting('SELFSIM_RECORD_RUNS', False):
        return
    from .models import PipelineRun

    try:
        if PipelineRun._meta.db_table not in connection.introspection.table_names():
            logger.debug('Run registry table missing; run manage.py migrate to record runs')
            return
        PipelineRun.objects.create(
            subcommand=outcome.subcommand,
            config_hash=outcome.config_hash,
            status=outcome.status,
            output_dir=str(outcome.output_dir),
            seed=cfg.seed,
            workers=cfg.workers,
            metrics=json.loads(json.dumps(outcome.metrics, cls=DjangoJSONEncoder)),
            error=error,
            finished_at=timezone.now(),
            wall_time=outcome.wall_time,
        )
    except DatabaseError:
        logger.exception('Failed to record the pipeline run')


def run_pipeline(cfg: RunConfig, subcommand: str, out_dir: Optional[Union[str, Path]] = None,
                 workers: Optional[int] = None, seed: Optional[int] = None) -> PipelineOutcome:
    """
    Run one subcommand and write its artifacts and manifest.

    The manifest is written on failure as well, with status 'failed' and
    the error message; the error is then re-raised for the caller to map
    onto an exit code.
    """
    if subcommand not in RUNNERS:
        raise ValueError(f'unknown subcommand {subcommand!r}, expected one of {", ".join(SUBCOMMANDS)}')
    cfg = cfg.with_overrides(output=out_dir, seed=seed, workers=workers)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    run = _Run(cfg, subcommand, out)

    started = timezone.now()
    clock = time.perf_counter()
    logger.info(f'Running {subcommand} into {out} (config {digest[:12]}, workers={cfg.workers}, seed={cfg.seed})')
    status, error = 'passed', ''
    try:
        with scipy.fft.set_workers(cfg.workers):
            RUNNERS[subcommand](run)
    except Exception as e:
        status, error = 'failed', str(e)
        raise
    finally:
        wall_time = time.perf_counter() - clock
        manifest = _write_manifest(run, digest, status, wall_time, started, error)
        outcome = PipelineOutcome(subcommand, status, out, digest, run.metrics, run.artifacts, wall_time, manifest)
        _record(outcome, cfg, error)
        logger.info(f'{subcommand} {status} in {wall_time:.2f}s')
    return outcome


def load_manifest(path: Union[str, Path]) -> Dict[str, object]:
    return json.loads(Path(path).read_text())


def artifact_digests(outcome: PipelineOutcome) -> Dict[str, str]:
    return {p.name: file_digest(p) for p in outcome.artifacts}
