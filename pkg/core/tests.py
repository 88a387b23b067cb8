import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.cache import cache
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from diagnostics.exceptions import DiagnosticsError
from evolver.exceptions import EvolverStepError
from fields.dumps import read_profile
from profiles.exceptions import ContinuationStalled, MaxItersExceeded

from .config import emit_config, environment_overrides, load_config, parse_config
from .exceptions import BadValue, MissingKey, UnreadableConfig, exit_code_for
from .models import PipelineRun
from .pipeline import load_manifest, run_pipeline

MINIMAL = 'datum:\n  amplitude: 0.01\n'

SMALL = """\
datum:
  amplitude: 0.01
grid:
  half_width: 8.0
  n: 16
  sphere_polar: 16
  sphere_azimuth: 32
  duhamel_nodes: 12
solve:
  sigma_schedule: [0.0]
evolve:
  t0: 1.0
  t1: 2.0
  dt: 0.25
  monitor: false
"""

VERIFIED = """\
datum:
  amplitude: 0.01
grid:
  half_width: 8.0
  n: 32
  sphere_polar: 16
  sphere_azimuth: 32
  duhamel_nodes: 16
solve:
  sigma_schedule: [0.0, 1.0]
evolve:
  t0: 1.0
  t1: 1.5
  dt: 0.02
  monitor: false
"""


def small_config(**sections):
    text = SMALL
    for section, body in sections.items():
        text += f'{section}:\n' + ''.join(f'  {key}: {value}\n' for key, value in body.items())
    return text


class ParseConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text, name='run.yaml'):
        path = Path(self.tmp.name) / name
        path.write_text(text)
        return path

    def test_minimal_config_fills_defaults(self):
        cfg = parse_config(self.write(MINIMAL), environ={})
        self.assertEqual(cfg.grid.half_width, 16.0)
        self.assertEqual(cfg.grid.n, 64)
        self.assertEqual(cfg.gamma, 0.5)
        self.assertIsNone(cfg.solve.damping)
        self.assertEqual(cfg.solve.damping_for(0.02), 1.0)
        self.assertEqual(cfg.datum.amplitude, 0.01)
        self.assertEqual((cfg.t0, cfg.t1, cfg.evolve.dt), (1.0, 2.0, 0.01))

    def test_damping_follows_datum_size(self):
        cfg = load_config('datum:\n  amplitude: 1.0\n', environ={})
        self.assertEqual(cfg.solve.damping_for(2.0), 0.5)
        pinned = load_config('datum:\n  amplitude: 1.0\nsolve:\n  damping: 0.8\n', environ={})
        self.assertEqual(pinned.solve.damping_for(2.0), 0.8)
        again = load_config(emit_config(cfg), environ={})
        self.assertIsNone(again.solve.damping)

    def test_gamma_out_of_range(self):
        with self.assertRaises(BadValue) as ctx:
            load_config(MINIMAL + 'solve:\n  gamma: 1.5\n', environ={})
        self.assertIn('gamma must lie in (0,1]', str(ctx.exception))
        self.assertIn('solve.gamma (line 4)', str(ctx.exception))
        self.assertEqual(exit_code_for(ctx.exception), 3)

    def test_non_power_of_two_grid_warns(self):
        with self.assertLogs('core.config', level='WARNING') as logs:
            cfg = load_config(MINIMAL + 'grid:\n  n: 10\n', environ={})
        self.assertEqual(cfg.grid.n, 10)
        self.assertIn('not a power of two', logs.output[0])

    def test_odd_grid_rejected(self):
        with self.assertRaises(BadValue) as ctx:
            load_config(MINIMAL + 'grid:\n  n: 11\n', environ={})
        self.assertIn('grid (line 3)', str(ctx.exception))

    def test_missing_amplitude(self):
        for text in ('grid:\n  n: 16\n', 'datum:\n  velocity_potential: helical\n'):
            with self.subTest(text=text), self.assertRaises(MissingKey) as ctx:
                load_config(text, environ={})
            self.assertEqual(exit_code_for(ctx.exception), 2)

    def test_unknown_key_names_line(self):
        with self.assertRaises(BadValue) as ctx:
            load_config(MINIMAL + '  colour: red\n', environ={})
        self.assertIn('datum.colour (line 3)', str(ctx.exception))

    def test_bad_types(self):
        cases = [
            'grid:\n  n: 16.5\n',
            'evolve:\n  monitor: 1\n',
            'datum:\n  amplitude: loud\n',
            'datum:\n  amplitude: 0.01\n  velocity_potential: spiral\n',
            'solve:\n  sigma_schedule: [1.0, 0.5]\n',
            'evolve:\n  t0: 2.0\n  t1: 1.0\n',
        ]
        for text in cases:
            if not text.startswith('datum'):
                text = MINIMAL + text
            with self.subTest(text=text), self.assertRaises(BadValue):
                load_config(text, environ={})

    def test_exponent_strings_are_numbers(self):
        cfg = load_config(MINIMAL + 'solve:\n  tol_fixed_point: 1e-10\n', environ={})
        self.assertEqual(cfg.solve.tol_fixed_point, 1e-10)

    def test_unreadable(self):
        with self.assertRaises(UnreadableConfig) as ctx:
            parse_config(Path(self.tmp.name) / 'missing.yaml')
        self.assertEqual(exit_code_for(ctx.exception), 4)
        for text in ('datum: [0.01\n', '- 1\n- 2\n'):
            with self.subTest(text=text), self.assertRaises(UnreadableConfig):
                load_config(text, environ={})

    def test_missing_trace_file(self):
        with self.assertRaises(UnreadableConfig):
            load_config(MINIMAL + '  trace_file: /nonexistent/trace.npz\n', environ={})

    def test_emit_then_parse_is_identity(self):
        cfg = load_config(small_config(output={'seed': 7, 'workers': 2}), environ={})
        again = parse_config(self.write(emit_config(cfg)), environ={})
        self.assertEqual(again, cfg)
        self.assertEqual(emit_config(again), emit_config(cfg))
        self.assertEqual(again.evolve.seed, 7)

    def test_environment_overrides(self):
        environ = {'SELFSIM_GRID__N': '32', 'SELFSIM_SOLVE__SIGMA_SCHEDULE': '[0.0, 1.0]',
                   'SELFSIM_LOG_LEVEL': 'DEBUG', 'SELFSIM_OTHER__KEY': '1'}
        self.assertEqual(set(environment_overrides(environ)), {('grid', 'n'), ('solve', 'sigma_schedule')})
        cfg = load_config(MINIMAL, environ=environ)
        self.assertEqual(cfg.grid.n, 32)
        self.assertEqual(cfg.solve.sigma_schedule, (0.0, 1.0))

    def test_environment_override_unknown_key(self):
        with self.assertRaises(BadValue):
            load_config(MINIMAL, environ={'SELFSIM_GRID__SIZE': '32'})

    def test_command_line_overrides(self):
        cfg = load_config(MINIMAL, environ={}).with_overrides(output='elsewhere', seed=11, workers=3)
        self.assertEqual((cfg.output, cfg.seed, cfg.workers, cfg.evolve.seed), ('elsewhere', 11, 3, 11))
        with self.assertRaises(BadValue):
            cfg.with_overrides(workers=0)


class ExitCodeTests(SimpleTestCase):
    def test_documented_codes(self):
        cases = [
            (MissingKey('x'), 2),
            (BadValue('x'), 3),
            (UnreadableConfig('x'), 4),
            (MaxItersExceeded('x'), 5),
            (ContinuationStalled('x'), 6),
            (EvolverStepError('x', 1.0, 1e-6), 8),
            (DiagnosticsError('x'), 9),
            (RuntimeError('x'), 1),
        ]
        for exc, code in cases:
            with self.subTest(exc=type(exc).__name__):
                self.assertEqual(exit_code_for(exc), code)


class PipelineTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        settings = override_settings(SELFSIM_CACHE_DIR=self.root / 'cache', SELFSIM_RECORD_RUNS=True)
        settings.enable()
        self.addCleanup(settings.disable)
        cache.clear()

    def config(self, text=SMALL):
        return load_config(text, environ={})

    def test_linear_solve_writes_zero_correction(self):
        outcome = run_pipeline(self.config(), 'solve-profile', self.root / 'linear')
        out = self.root / 'linear'
        self.assertTrue(outcome.passed)
        self.assertEqual(read_profile(out / 'v_hat.ssvf').max_abs(), 0.0)
        self.assertEqual(read_profile(out / 'H_hat.ssvf').max_abs(), 0.0)

        manifest = load_manifest(out / 'solve-profile.manifest.json')
        self.assertEqual(manifest['status'], 'passed')
        self.assertEqual(manifest['metrics']['residual'], 0.0)
        self.assertEqual(manifest['config_hash'], outcome.config_hash)
        listed = {entry['path'] for entry in manifest['artifacts']}
        self.assertEqual(listed, {'sigma_norms.csv', 'v_hat.ssvf', 'H_hat.ssvf'})

        rows = np.loadtxt(out / 'sigma_norms.csv', delimiter=',', skiprows=1, ndmin=2)
        np.testing.assert_array_equal(rows, [[0.0, 0.0, 0.0, 0.0]])
        self.assertEqual((out / 'sigma_norms.csv').read_text().splitlines()[0], 'sigma,norm,residual,iters')

    def test_run_recorded(self):
        outcome = run_pipeline(self.config(), 'solve-profile', self.root / 'recorded')
        run = PipelineRun.objects.get()
        self.assertEqual(run.subcommand, 'solve-profile')
        self.assertEqual(run.config_hash, outcome.config_hash)
        self.assertEqual(run.status, PipelineRun.Status.PASSED)
        self.assertEqual(run.metrics['residual'], 0.0)
        self.assertIsNotNone(run.finished_at)

    def test_rerun_gives_identical_tables(self):
        cfg = self.config(SMALL.replace('sigma_schedule: [0.0]', 'sigma_schedule: [0.0, 1.0]'))
        first = run_pipeline(cfg, 'solve-profile', self.root / 'a')
        run_pipeline(cfg, 'solve-profile', self.root / 'b')
        for name in ('sigma_norms.csv', 'v_hat.ssvf', 'H_hat.ssvf'):
            with self.subTest(artifact=name):
                self.assertEqual((self.root / 'a' / name).read_bytes(), (self.root / 'b' / name).read_bytes())
        self.assertGreater(first.metrics['norm'], 0.0)

    def test_sweep_sigma_rows_and_dumps(self):
        cfg = self.config(SMALL.replace('sigma_schedule: [0.0]', 'sigma_schedule: [0.0, 0.5, 1.0]'))
        outcome = run_pipeline(cfg, 'sweep-sigma', self.root / 'sweep')
        rows = np.loadtxt(self.root / 'sweep' / 'sigma_sweep.csv', delimiter=',', skiprows=1, ndmin=2)
        np.testing.assert_array_equal(rows[:, 0], [0.0, 0.5, 1.0])
        self.assertTrue(np.all(np.diff(rows[:, 1]) > 0))
        self.assertEqual(len(outcome.artifacts), 7)

    def test_caloric(self):
        outcome = run_pipeline(self.config(), 'caloric', self.root / 'caloric')
        rows = np.loadtxt(self.root / 'caloric' / 'caloric.csv', delimiter=',', skiprows=1, ndmin=2)
        self.assertEqual(rows.shape, (2, 4))
        np.testing.assert_allclose(rows[:, 0], [0.01, 0.01], rtol=1e-12)
        self.assertEqual({p.name for p in outcome.artifacts}, {'caloric_U0.ssvf', 'caloric_G0.ssvf', 'caloric.csv'})

    def test_evolve_trajectory(self):
        out = self.root / 'evolve'
        run_pipeline(self.config(), 'solve-profile', out)
        outcome = run_pipeline(self.config(), 'evolve', out)
        rows = np.loadtxt(out / 'trajectory.csv', delimiter=',', skiprows=1, ndmin=2)
        self.assertEqual(rows.shape, (5, 8))
        np.testing.assert_allclose(rows[:, 0], [1.0, 1.25, 1.5, 1.75, 2.0])
        self.assertTrue(np.all(np.diff(rows[:, 1]) < 0))
        self.assertIn('self_similarity_error', outcome.metrics)

        manifests = [load_manifest(p) for p in sorted(out.glob('*.manifest.json'))]
        listed = [entry['path'] for m in manifests for entry in m['artifacts']]
        self.assertEqual(len(listed), len(set(listed)))
        on_disk = {p.name for p in out.iterdir() if not p.name.endswith('.manifest.json')}
        self.assertEqual(set(listed), on_disk)

    def test_failed_run_still_writes_manifest(self):
        with self.assertRaises(UnreadableConfig):
            run_pipeline(self.config(), 'verify', self.root / 'empty')
        manifest = load_manifest(self.root / 'empty' / 'verify.manifest.json')
        self.assertEqual(manifest['status'], 'failed')
        self.assertIn('no profile dumps', manifest['error'])
        self.assertEqual(PipelineRun.objects.get().status, PipelineRun.Status.FAILED)

    @override_settings(SELFSIM_RECORD_RUNS=False)
    def test_recording_can_be_disabled(self):
        run_pipeline(self.config(), 'solve-profile', self.root / 'quiet')
        self.assertFalse(PipelineRun.objects.exists())


class PipelineCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        settings = override_settings(SELFSIM_CACHE_DIR=self.root / 'cache')
        settings.enable()
        self.addCleanup(settings.disable)
        cache.clear()
        self.config = self.root / 'run.yaml'
        self.config.write_text(SMALL)

    def call(self, *args):
        stdout = StringIO()
        call_command('pipeline', *args, stdout=stdout)
        return stdout.getvalue()

    def test_solve_then_verify(self):
        self.config.write_text(VERIFIED)
        out = str(self.root / 'run')
        output = self.call('solve-profile', '--config', str(self.config), '--out', out, '--seed', '3')
        self.assertIn('solve-profile finished', output)
        self.call('verify', '--config', str(self.config), '--out', out, '--workers', '2')
        report = (self.root / 'run' / 'report.txt').read_text()
        flags = [line for line in report.splitlines() if line.startswith('pass.')]
        self.assertTrue(flags)
        for flag in flags:
            self.assertTrue(flag.endswith('= true'), flag)
        for name in ('profile_residual', 'divergence', 'decay', 'self_similarity', 'energy_identity'):
            self.assertIn(f'pass.{name} = true', report)
        manifest = json.loads((self.root / 'run' / 'verify.manifest.json').read_text())
        self.assertEqual(manifest['status'], 'passed')
        self.assertEqual(manifest['seed'], 0)
        self.assertEqual(manifest['workers'], 2)
        self.assertIn('report.csv', {entry['path'] for entry in manifest['artifacts']})

    def test_bad_config_exit_code(self):
        self.config.write_text(MINIMAL + 'solve:\n  gamma: 1.5\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('caloric', '--config', str(self.config), '--out', str(self.root / 'bad'))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('gamma must lie in (0,1]', str(ctx.exception))

    def test_verify_without_dumps(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('verify', '--config', str(self.config), '--out', str(self.root / 'nothing'))
        self.assertEqual(ctx.exception.returncode, 4)

    def test_missing_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('evolve', '--config', str(self.root / 'absent.yaml'))
        self.assertEqual(ctx.exception.returncode, 4)
