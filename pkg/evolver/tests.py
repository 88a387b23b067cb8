import numpy as np
from django.test import SimpleTestCase

from caloric.services import caloric_profile
from fields.grid import GridSpec
from fields.profiles import TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace
from fields.traces import DatumSpec, SphericalRule, build_datum

from .analysis import (cutoff_state, energy, energy_identity_residual, self_similarity_deviation,
                       smooth_step, temporal_order_ratio)
from .exceptions import EvolverStepError
from .integrator import EvolveConfig, EvolveState, divergence_maxima, evolve, evolve_step
from .monitor import ContractionMonitor
from .spectra import dissipation


def taylor_green(grid, amplitude, roll=0):
    """Divergence-free single-mode field; roll cycles the coordinate roles"""
    x, y, z = np.roll(grid.coordinates, roll, axis=0)
    field = amplitude * np.stack([np.sin(x) * np.cos(y) * np.cos(z),
                                  -np.cos(x) * np.sin(y) * np.cos(z),
                                  np.zeros_like(x)])
    return np.roll(field, -roll, axis=0)


def box(n=16):
    return GridSpec(half_width=np.pi, n=n)


def viscoelastic_state(grid, u_amp, F_amp, sigma=1.0, t=0.0):
    F = np.stack([taylor_green(grid, F_amp, roll=j + 1) for j in range(3)], axis=1)
    return EvolveState(VectorProfile(grid, taylor_green(grid, u_amp)), TensorProfile(grid, F), t, sigma)


class EvolveStepTests(SimpleTestCase):
    def setUp(self):
        self.grid = box()
        self.ws = FourierWorkspace(self.grid)

    def test_linear_mode_decays_exactly(self):
        state = viscoelastic_state(self.grid, 1.0, 0.5, sigma=0.0)
        out = evolve_step(state, 0.1, ws=self.ws)
        factor = np.exp(-3.0 * 0.1)
        np.testing.assert_allclose(out.u.data, factor * state.u.data, atol=1e-13)
        np.testing.assert_allclose(out.F.data, factor * state.F.data, atol=1e-13)
        self.assertAlmostEqual(out.t, 0.1)

    def test_zero_stays_zero(self):
        out = evolve_step(EvolveState.zeros(self.grid), 0.05, ws=self.ws)
        self.assertEqual(out.u.max_abs(), 0.0)
        self.assertEqual(out.F.max_abs(), 0.0)

    def test_nonzero_dt_required(self):
        with self.assertRaises(ValueError):
            evolve_step(EvolveState.zeros(self.grid), 0.0, ws=self.ws)

    def test_rejects_divergent_state(self):
        data = np.zeros((3,) + self.grid.shape)
        data[0] = np.sin(self.grid.coordinates[0])
        state = EvolveState(VectorProfile(self.grid, data), TensorProfile.zeros(self.grid), 0.0)
        with self.assertRaises(ValueError):
            evolve_step(state, 0.01, ws=self.ws)

    def test_nonlinear_step_energy_decreases(self):
        state = viscoelastic_state(self.grid, 0.1, 0.0)
        out = evolve_step(state, 0.01, ws=self.ws)
        self.assertLess(energy(out), energy(state))

    def test_step_failure_at_floor(self):
        state = viscoelastic_state(self.grid, 1.0, 1.0)
        with self.assertLogs('evolver.integrator', 'WARNING'):
            with self.assertRaises(EvolverStepError) as ctx:
                evolve_step(state, 0.01, picard_iters=1, ws=self.ws, tol=1e-300, dt_floor=0.004)
        self.assertEqual(ctx.exception.dt, 0.005)


class EvolveTests(SimpleTestCase):
    def setUp(self):
        self.grid = box()
        self.ws = FourierWorkspace(self.grid)
        self.cfg = EvolveConfig(dt=0.01, monitor=False)

    def test_zero_trajectory(self):
        result = evolve(EvolveState.zeros(self.grid), 0.0, 0.1, self.cfg, self.ws)
        self.assertEqual(result.trajectory.shape, (11, 8))
        self.assertTrue(np.all(result.trajectory[:, 1:] == 0.0))

    def test_energy_identity(self):
        state = viscoelastic_state(self.grid, 0.1, 0.05)
        result = evolve(state, 0.0, 0.2, self.cfg, self.ws)
        energies = result.column('energy')
        self.assertTrue(np.all(np.diff(energies) < 0))
        self.assertLess(energy_identity_residual(result), 1e-2)

    def test_dissipation_matches_gradient_quadrature(self):
        state = viscoelastic_state(self.grid, 0.3, 0.2)
        grads = [self.ws.gradient(c) for c in
                 list(state.u.data) + [state.F.data[i, j] for i in range(3) for j in range(3)]]
        direct = sum(float(np.sum(g ** 2)) for g in grads) * self.grid.cell_volume
        self.assertAlmostEqual(dissipation(state.spectrum(self.ws), self.ws) / direct, 1.0, places=10)

    def test_divergence_of_F_preserved(self):
        state = viscoelastic_state(self.grid, 0.5, 0.5)
        result = evolve(state, 0.0, 1.0, self.cfg, self.ws)
        self.assertEqual(len(result.trajectory), 101)
        scale = result.final.F.max_abs()
        self.assertLess(float(np.max(result.column('div_F'))), 1e-10 * max(scale, 1.0))

    def test_temporal_order(self):
        state = viscoelastic_state(self.grid, 1.0, 1.0)

        def run(dt):
            return evolve(state, 0.0, 0.2, EvolveConfig(dt=dt, monitor=False), self.ws).final

        ratio, e1, e2 = temporal_order_ratio(run, 0.05)
        self.assertGreater(e1, e2)
        self.assertTrue(3.0 <= ratio <= 5.0, ratio)

    def test_summary_and_spacetime_norms(self):
        state = viscoelastic_state(self.grid, 0.1, 0.1)
        result = evolve(state, 0.0, 0.05, self.cfg, self.ws)
        summary = result.summary()
        self.assertGreater(summary['u_L5m3'], 0.0)
        self.assertGreater(summary['F_L5m3'], 0.0)
        self.assertEqual(summary['rejected_steps'], 0)
        self.assertAlmostEqual(summary['t_final'], 0.05)

    def test_bad_window(self):
        with self.assertRaises(ValueError):
            evolve(EvolveState.zeros(self.grid), 1.0, 1.0, self.cfg, self.ws)


class HeatSelfSimilarityTests(SimpleTestCase):
    def test_caloric_profile_scales_under_heat_flow(self):
        grid = GridSpec(half_width=8.0, n=32, sphere_polar=16, sphere_azimuth=32)
        datum = build_datum(DatumSpec(amplitude=0.05), SphericalRule.for_grid(grid))
        W = caloric_profile(datum.velocity, grid)
        G = caloric_profile(datum.deformation, grid)
        init = EvolveState(W.field, G.field, 1.0, sigma=0.0)

        result = evolve(init, 1.0, 2.0, EvolveConfig(dt=0.5, monitor=False), project_initial=False)
        scale = np.sqrt(2.0)
        predicted = EvolveState(
            VectorProfile(grid, W.sampler().on_grid(scale) / scale),
            TensorProfile(grid, G.sampler().on_grid(scale) / scale),
            2.0, sigma=0.0,
        )
        self.assertLess(self_similarity_deviation(result.final, predicted), 2e-2)


class CutoffStateTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = GridSpec(half_width=8.0, n=32, sphere_polar=16, sphere_azimuth=32)
        cls.ws = FourierWorkspace(cls.grid)
        datum = build_datum(DatumSpec(amplitude=0.05), SphericalRule.for_grid(cls.grid))
        W = caloric_profile(datum.velocity, cls.grid)
        G = caloric_profile(datum.deformation, cls.grid)
        cls.state = EvolveState(W.field, G.field, 1.0, sigma=1.0)

    def test_smooth_step(self):
        r = np.array([0.0, 1.0, 2.0, 2.5, 3.0, 4.0])
        step = smooth_step(r, 1.0, 3.0)
        np.testing.assert_allclose(step[[0, 1]], 1.0)
        np.testing.assert_allclose(step[[4, 5]], 0.0)
        self.assertAlmostEqual(float(step[2]), 0.5, places=12)
        self.assertTrue(np.all(np.diff(step) <= 0.0))
        with self.assertRaises(ValueError):
            smooth_step(r, 3.0, 1.0)

    def test_cut_state_is_solenoidal_and_smaller(self):
        cut = cutoff_state(self.state, self.ws)
        div_u, div_F = divergence_maxima(cut.spectrum(self.ws), self.ws)
        self.assertLess(max(div_u, div_F), 1e-10 * max(cut.u.max_abs(), cut.F.max_abs()))
        self.assertLess(energy(cut), energy(self.state))
        core = self.grid.radius <= 1.0
        np.testing.assert_allclose(cut.u.data[:, core], self.state.u.data[:, core], atol=0.05 * self.state.u.max_abs())
        self.assertEqual(cut.t, self.state.t)

    def test_cut_state_obeys_energy_identity(self):
        cut = cutoff_state(self.state, self.ws)
        result = evolve(cut, 1.0, 1.2, EvolveConfig(dt=0.01, monitor=False), self.ws)
        self.assertLess(energy_identity_residual(result), 1e-2)

    def test_cutoff_inside_box(self):
        with self.assertRaises(ValueError):
            cutoff_state(self.state, self.ws, outer=9.0)


class ContractionMonitorTests(SimpleTestCase):
    def setUp(self):
        self.ws = FourierWorkspace(GridSpec(half_width=np.pi, n=16))

    def test_linear_problem_has_no_threshold(self):
        monitor = ContractionMonitor(self.ws, window=0.1, sigma=0.0)
        self.assertEqual(monitor.c0_estimate, 0.0)
        self.assertEqual(monitor.threshold, np.inf)

    def test_estimate_is_deterministic(self):
        a = ContractionMonitor(self.ws, window=0.1, trials=2, seed=4)
        b = ContractionMonitor(self.ws, window=0.1, trials=2, seed=4)
        self.assertGreater(a.c0_estimate, 0.0)
        self.assertEqual(a.c0_estimate, b.c0_estimate)

    def test_kappa_grows_within_window_and_resets(self):
        state = viscoelastic_state(self.ws.grid, 0.2, 0.1)
        monitor = ContractionMonitor(self.ws, window=0.1, trials=1)
        w = state.spectrum(self.ws)
        values = [monitor.observe(t, w) for t in (0.0, 0.05, 0.1)]
        self.assertEqual(values[0], 0.0)
        self.assertLess(values[1], values[2])
        self.assertEqual(monitor.observe(0.25, w), 0.0)
        self.assertEqual(len(monitor.history), 4)

    def test_alarm_for_large_data(self):
        state = viscoelastic_state(self.ws.grid, 1e4, 1e4)
        monitor = ContractionMonitor(self.ws, window=0.1, trials=1)
        w = state.spectrum(self.ws)
        with self.assertLogs('evolver.monitor', 'WARNING'):
            monitor.observe(0.0, w)
            monitor.observe(0.1, w)
        self.assertTrue(monitor.alarm)

    def test_m_below_three_rejected(self):
        with self.assertRaises(ValueError):
            ContractionMonitor(self.ws, window=0.1, m=2.0)
