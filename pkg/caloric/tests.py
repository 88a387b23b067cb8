import tempfile
from pathlib import Path

import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, override_settings
from scipy.integrate import trapezoid
from scipy.special import erf

from fields.grid import GridSpec
from fields.profiles import ScalarProfile
from fields.stencils import StencilCalculus
from fields.traces import DatumSpec, SphericalRule, SphericalTrace, build_datum

from .cache import cache_key, get_cached_caloric_profile, invalidate_caloric_cache
from .exceptions import CaloricQuadratureError
from .services import caloric_profile, caloric_residual, ray_integral


def erf_profile(grid):
    r = grid.radius
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, erf(safe / 2.0) / safe, 1.0 / np.sqrt(np.pi))


class RayIntegralTests(SimpleTestCase):
    def test_matches_radial_quadrature(self):
        r = np.linspace(0.0, 40.0, 400001)
        x = np.array([1.3, -0.4, 2.2])
        theta = np.array([0.6, 0.0, 0.8])
        gauss = (4 * np.pi) ** -1.5 * np.exp(-np.sum((x[None] - r[:, None] * theta) ** 2, axis=1) / 4)
        oracle = trapezoid(gauss * r, r)
        value = ray_integral(np.array([[x @ x]]), np.array([[x @ theta]]))[0, 0]
        self.assertAlmostEqual(value, oracle, places=10)


class CaloricProfileTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=8.0, n=32)
        self.rule = SphericalRule.for_grid(self.grid)

    def test_zero_trace(self):
        trace = SphericalTrace(self.rule, np.zeros((self.rule.n_polar, self.rule.n_azimuth, 3)))
        profile = caloric_profile(trace, self.grid)
        self.assertEqual(profile.field.max_abs(), 0.0)
        self.assertEqual(profile.c_star, 0.0)

    def test_inverse_radius_gives_erf_profile(self):
        trace = SphericalTrace(self.rule, np.ones((self.rule.n_polar, self.rule.n_azimuth)))
        profile = caloric_profile(trace, self.grid)
        self.assertIsInstance(profile.field, ScalarProfile)
        expected = erf_profile(self.grid)
        r = self.grid.radius

        shell = (r >= 0.5) & (r <= self.grid.half_width / 4)
        rel = np.abs(profile.data[shell] - expected[shell]) / expected[shell]
        self.assertLess(np.max(rel), 1e-6)

        origin = self.grid.index_of((0.0, 0.0, 0.0))
        self.assertAlmostEqual(profile.data[origin], 0.5641895835, places=9)

    def test_far_field_approaches_datum(self):
        trace = SphericalTrace(self.rule, np.ones((self.rule.n_polar, self.rule.n_azimuth)))
        profile = caloric_profile(trace, self.grid)
        r = self.grid.radius
        far = (r >= self.grid.half_width / 2) & (r <= self.grid.half_width)
        gap = np.abs(profile.data[far] - 1.0 / r[far]) * r[far] ** 2
        self.assertLess(np.max(gap), 1e-2)

    def test_linearity(self):
        grid = GridSpec(half_width=4.0, n=8)
        rule = SphericalRule.for_grid(grid)
        xh = rule.nodes
        rng = np.random.default_rng(11)

        def smooth_trace():
            c0 = rng.standard_normal(3)
            c1 = rng.standard_normal((3, 3))
            c2 = rng.standard_normal((3, 3, 3))
            values = c0 + xh @ c1 + np.einsum('pai,paj,ijk->pak', xh, xh, c2)
            return SphericalTrace(rule, values)

        t1, t2 = smooth_trace(), smooth_trace()
        a, b = 0.7, -1.9
        combined = caloric_profile(t1.scaled(a) + t2.scaled(b), grid).data
        separate = a * caloric_profile(t1, grid).data + b * caloric_profile(t2, grid).data
        np.testing.assert_allclose(combined, separate, atol=1e-12 * np.max(np.abs(separate)))

    def test_decay_bound_and_divergence_of_curl_datum(self):
        grid = GridSpec(half_width=4.0, n=32)
        datum = build_datum(DatumSpec(amplitude=0.01), SphericalRule.for_grid(grid))
        profile = caloric_profile(datum.velocity, grid)
        self.assertLessEqual(profile.decay_ratio(), 3.0)

        calc = StencilCalculus(grid)
        div = calc.divergence(profile.data)[grid.interior(calc.band)]
        self.assertLess(np.max(np.abs(div)), 1e-3 * profile.c_star)

    def test_unresolved_trace_reports_worst_node(self):
        trace = SphericalTrace(self.rule, np.ones((self.rule.n_polar, self.rule.n_azimuth)))
        with self.assertRaises(CaloricQuadratureError) as ctx:
            caloric_profile(trace, self.grid, tol=1e-30, max_refinements=0)
        self.assertEqual(len(ctx.exception.worst_node), 3)
        self.assertGreater(ctx.exception.estimate, 0.0)


class CaloricResidualTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=8.0, n=64)

    def test_zero_profile(self):
        self.assertEqual(caloric_residual(ScalarProfile.zeros(self.grid)), 0.0)

    def test_erf_profile_solves_profile_heat_equation(self):
        profile = ScalarProfile(self.grid, erf_profile(self.grid))
        self.assertLess(caloric_residual(profile), 1e-4)

    def test_heat_kernel_profile_has_degree_three(self):
        gaussian = (4 * np.pi) ** -1.5 * np.exp(-self.grid.radius ** 2 / 4)
        profile = ScalarProfile(self.grid, gaussian)
        self.assertLess(caloric_residual(profile, degree=3.0), 1e-8)
        self.assertGreater(caloric_residual(profile, degree=1.0), 1e-2)


class CaloricCacheTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=4.0, n=8, sphere_polar=8, sphere_azimuth=16)
        self.trace = build_datum(DatumSpec(amplitude=0.02), SphericalRule.for_grid(self.grid)).velocity
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        cache.clear()

    def test_profile_written_reused_and_invalidated(self):
        with override_settings(SELFSIM_CACHE_DIR=Path(self.tmp.name)):
            first = get_cached_caloric_profile(self.trace, self.grid)
            path = Path(self.tmp.name) / f'{cache_key(self.trace, self.grid)}.ssvf'
            self.assertTrue(path.exists())

            cache.clear()
            second = get_cached_caloric_profile(self.trace, self.grid)
            np.testing.assert_array_equal(first.data, second.data)
            self.assertEqual(second.c_star, self.trace.c_star)

            invalidate_caloric_cache(self.trace, self.grid)
            self.assertFalse(path.exists())

    def test_hit_keeps_error_estimate(self):
        with override_settings(SELFSIM_CACHE_DIR=Path(self.tmp.name)):
            first = get_cached_caloric_profile(self.trace, self.grid)
            cache.clear()
            second = get_cached_caloric_profile(self.trace, self.grid)
            self.assertEqual(second.error_estimate, first.error_estimate)
            self.assertTrue((Path(self.tmp.name) / f'{cache_key(self.trace, self.grid)}.json').exists())

    def test_key_covers_quadrature_settings_and_mask(self):
        base = cache_key(self.trace, self.grid)
        self.assertEqual(base, cache_key(self.trace, self.grid, tol=1e-2, max_refinements=2))
        self.assertNotEqual(base, cache_key(self.trace, self.grid, tol=1e-4))
        self.assertNotEqual(base, cache_key(self.trace, self.grid, max_refinements=0))
        masked = GridSpec(half_width=4.0, n=8, sphere_polar=8, sphere_azimuth=16, origin_mask_radius=3.0)
        self.assertNotEqual(base, cache_key(self.trace, masked))
