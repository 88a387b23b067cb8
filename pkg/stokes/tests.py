import numpy as np
from django.test import SimpleTestCase

from fields.grid import GridSpec
from fields.profiles import TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace, spectral_divergence

from .duhamel import DuhamelSchedule, phi_profile
from .exceptions import DuhamelQuadratureError
from .operators import heat_propagate, leray_project, recover_pressure


class SpectralTestCase(SimpleTestCase):
    half_width = 3.0
    n = 16

    def setUp(self):
        self.grid = GridSpec(half_width=self.half_width, n=self.n)
        self.ws = FourierWorkspace(self.grid)
        self.x = self.grid.coordinates
        self.k1 = np.pi / self.grid.half_width
        self.rng = np.random.default_rng(5)

    def vector(self, *components):
        return VectorProfile(self.grid, np.stack([np.broadcast_to(c, self.grid.shape) for c in components]))


class LerayProjectionTests(SpectralTestCase):
    def test_divergence_free_mode_unchanged(self):
        u = self.vector(0.0, np.sin(self.k1 * self.x[0]), 0.0)
        np.testing.assert_allclose(leray_project(u, self.ws).data, u.data, atol=1e-13)

    def test_gradient_annihilated(self):
        # grad cos(k x1) = -k sin(k x1) e1
        u = self.vector(-self.k1 * np.sin(self.k1 * self.x[0]), 0.0, 0.0)
        self.assertLess(leray_project(u, self.ws).max_abs(), 1e-13)

    def test_oblique_mode(self):
        s = np.sin(self.k1 * self.x[0])
        projected = leray_project(self.vector(s, s, 0.0), self.ws)
        np.testing.assert_allclose(projected.data, self.vector(0.0, s, 0.0).data, atol=1e-13)

    def test_constant_field_passes_through(self):
        u = self.vector(1.0, -2.0, 0.5)
        np.testing.assert_allclose(leray_project(u, self.ws).data, u.data, atol=1e-13)

    def test_idempotent_and_divergence_free(self):
        for _ in range(3):
            u = VectorProfile(self.grid, self.rng.standard_normal((3,) + self.grid.shape))
            once = leray_project(u, self.ws)
            twice = leray_project(once, self.ws)
            self.assertLess(np.max(np.abs(twice.data - once.data)), 1e-12 * once.max_abs())
            self.assertLess(spectral_divergence(once, self.ws).relative, 1e-10)


class HeatPropagateTests(SpectralTestCase):
    def test_zero_duration_is_identity(self):
        u = VectorProfile(self.grid, self.rng.standard_normal((3,) + self.grid.shape))
        np.testing.assert_array_equal(heat_propagate(u, 0.0, self.ws).data, u.data)

    def test_constant_unchanged(self):
        u = self.vector(1.0, 2.0, 3.0)
        np.testing.assert_allclose(heat_propagate(u, 5.0, self.ws).data, u.data, atol=1e-13)

    def test_single_mode_decay(self):
        mode = np.sin(self.k1 * self.x[0]) * np.sin(2 * self.k1 * self.x[1])
        u = self.vector(0.0, 0.0, mode)
        tau = 0.3
        expected = np.exp(-5 * self.k1 ** 2 * tau) * u.data
        np.testing.assert_allclose(heat_propagate(u, tau, self.ws).data, expected, atol=1e-13)

    def test_semigroup(self):
        u = VectorProfile(self.grid, self.rng.standard_normal((3,) + self.grid.shape))
        split = heat_propagate(heat_propagate(u, 0.1, self.ws), 0.25, self.ws)
        np.testing.assert_allclose(split.data, heat_propagate(u, 0.35, self.ws).data, atol=1e-13)

    def test_negative_duration_rejected(self):
        with self.assertRaises(ValueError):
            heat_propagate(self.vector(1.0, 0.0, 0.0), -0.1, self.ws)


class RecoverPressureTests(SpectralTestCase):
    def test_zero_source(self):
        zero = TensorProfile.zeros(self.grid)
        self.assertEqual(recover_pressure(zero, self.ws).max_abs(), 0.0)

    def test_isotropic_source(self):
        phi = np.cos(self.k1 * self.x[0])
        data = np.zeros((3, 3) + self.grid.shape)
        for i in range(3):
            data[i, i] = phi
        pressure = recover_pressure(TensorProfile(self.grid, data), self.ws)
        np.testing.assert_allclose(pressure.data, phi, atol=1e-13)

    def test_antisymmetric_source(self):
        a = self.rng.standard_normal((3, 3) + self.grid.shape)
        source = TensorProfile(self.grid, a - np.swapaxes(a, 0, 1))
        self.assertLess(recover_pressure(source, self.ws).max_abs(), 1e-12 * source.max_abs())


class DuhamelScheduleTests(SimpleTestCase):
    def test_weights_integrate_constants(self):
        sched = DuhamelSchedule(64)
        self.assertTrue(np.all(sched.weights > 0))
        self.assertTrue(np.all(sched.nodes > 0))
        self.assertAlmostEqual(float(np.sum(sched.weights)), 1.0, places=14)

    def test_square_root_integrand_is_exact(self):
        sched = DuhamelSchedule(8)
        self.assertAlmostEqual(float(np.sum(sched.weights * np.sqrt(sched.nodes))), 2.0 / 3.0, places=14)

    def test_halved(self):
        self.assertEqual(DuhamelSchedule(64).halved().n_nodes, 32)


def decaying_source(grid, alpha=0.5):
    data = np.zeros((3, 3) + grid.shape)
    data[0, 1] = grid.japanese_bracket ** -(2.0 + alpha)
    return TensorProfile(grid, data, gamma=alpha / 2.0)


class PhiProfileTests(SpectralTestCase):
    half_width = 4.0
    n = 16

    def setUp(self):
        super().setUp()
        self.sched = DuhamelSchedule(16)

    def random_source(self):
        envelope = self.grid.japanese_bracket ** -3.0
        return TensorProfile(self.grid, self.rng.standard_normal((3, 3) + self.grid.shape) * envelope)

    def test_zero_source(self):
        out = phi_profile(TensorProfile.zeros(self.grid), self.sched, self.ws)
        self.assertEqual(out.max_abs(), 0.0)

    def test_linear_in_source(self):
        a, b = self.random_source(), self.random_source()
        combined = phi_profile(a * 2.0 + b * -0.5, self.sched, self.ws).data
        separate = 2.0 * phi_profile(a, self.sched, self.ws).data - 0.5 * phi_profile(b, self.sched, self.ws).data
        self.assertLess(np.max(np.abs(combined - separate)), 1e-10 * np.max(np.abs(separate)))

    def test_output_divergence_free(self):
        out = phi_profile(self.random_source(), self.sched, self.ws)
        self.assertLess(spectral_divergence(out, self.ws).relative, 1e-10)

    def test_weighted_sup_stable_under_box_doubling(self):
        alpha = 0.5
        sups = []
        for half_width, n in ((4.0, 16), (8.0, 32)):
            grid = GridSpec(half_width=half_width, n=n)
            out = phi_profile(decaying_source(grid, alpha), DuhamelSchedule(32), FourierWorkspace(grid))
            ball = grid.radius <= 2.0
            weighted = grid.japanese_bracket ** (2.0 + alpha) * out.magnitude()
            sups.append(float(np.max(weighted[ball])))
        self.assertTrue(np.isfinite(sups[0]) and sups[0] > 0)
        self.assertLess(abs(sups[1] - sups[0]) / sups[1], 0.1)

    def test_halving_check_raises(self):
        with self.assertRaises(DuhamelQuadratureError) as ctx:
            phi_profile(decaying_source(self.grid), DuhamelSchedule(2), self.ws, tol=1e-14)
        self.assertEqual(ctx.exception.n_nodes, 2)
