import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .dumps import HEADER, decode_profile, encode_profile, read_profile, write_profile
from .exceptions import DumpFormatError, GridError, GridMismatch, TraceError
from .grid import GridSpec
from .norms import x_gamma4_norm, x_gamma_norm
from .profiles import ScalarProfile, TensorProfile, VectorProfile
from .sampling import ProfileSampler
from .spectral import FourierWorkspace, spectral_divergence
from .stencils import StencilCalculus
from .traces import (DatumSpec, SphericalRule, SphericalTrace, axial_potential, build_datum,
                     constant_potential, curl_of_degree0_potential, sample_trace)


class GridSpecTests(SimpleTestCase):
    def test_spacing_and_origin_node(self):
        grid = GridSpec(half_width=4.0, n=16)
        self.assertAlmostEqual(grid.spacing, 0.5)
        self.assertAlmostEqual(grid.mask_radius, 1.0)
        self.assertEqual(grid.index_of((0.0, 0.0, 0.0)), (8, 8, 8))
        self.assertEqual(grid.coordinates.shape, (3, 16, 16, 16))

    def test_rejects_bad_resolution(self):
        with self.assertRaises(GridError):
            GridSpec(half_width=4.0, n=7)
        with self.assertRaises(GridError):
            GridSpec(half_width=-1.0, n=16)

    def test_rejects_mask_below_spacing(self):
        with self.assertRaises(GridError):
            GridSpec(half_width=4.0, n=16, origin_mask_radius=0.2)

    def test_with_half_width_keeps_resolution(self):
        grid = GridSpec(half_width=4.0, n=16).with_half_width(8.0)
        self.assertEqual(grid.n, 16)
        self.assertAlmostEqual(grid.mask_radius, 2.0)


class CurlTraceTests(SimpleTestCase):
    def setUp(self):
        self.rule = SphericalRule(8, 16)

    def test_constant_potential_gives_zero_trace(self):
        trace = curl_of_degree0_potential(constant_potential((0.3, -1.0, 2.0)), self.rule)
        self.assertTrue(trace.curl_constructed)
        self.assertLess(np.max(np.abs(trace.values)), 1e-12)

    def test_axial_potential_matches_symbolic_curl(self):
        trace = curl_of_degree0_potential(axial_potential(2), self.rule)
        xh = self.rule.nodes
        expected = np.stack([-xh[..., 1] * xh[..., 2], xh[..., 0] * xh[..., 2], np.zeros_like(xh[..., 0])], axis=-1)
        np.testing.assert_allclose(trace.values, expected, atol=1e-8)

    def test_non_finite_potential_rejected(self):
        with self.assertRaises(TraceError):
            curl_of_degree0_potential(lambda xh: xh / (xh[..., 2:3] - xh[..., 2:3]), self.rule)

    def test_build_datum_normalises_to_amplitude(self):
        datum = build_datum(DatumSpec(amplitude=0.01, deformation_ratio=0.5), self.rule)
        self.assertAlmostEqual(datum.velocity.c_star, 0.01)
        self.assertAlmostEqual(datum.deformation.c_star, 0.005)
        self.assertEqual(datum.deformation.value_shape, (3, 3))

    def test_unknown_family_rejected(self):
        with self.assertRaises(TraceError):
            build_datum(DatumSpec(velocity_potential='vortex-ring'), self.rule)


class SampleTraceTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=4.0, n=16, sphere_polar=16, sphere_azimuth=32)
        self.rule = SphericalRule.for_grid(self.grid)

    def test_zero_trace_gives_zero_field(self):
        trace = SphericalTrace(self.rule, np.zeros((16, 32, 3)))
        profile = sample_trace(trace, self.grid)
        self.assertEqual(profile.max_abs(), 0.0)
        self.assertTrue(profile.masked)

    def test_unit_trace_scales_like_inverse_radius(self):
        values = np.zeros((16, 32, 3))
        values[..., 0] = 1.0
        profile = sample_trace(SphericalTrace(self.rule, values), self.grid)
        i, j, k = self.grid.index_of((2.0, 0.0, 0.0))
        np.testing.assert_allclose(profile.data[:, i, j, k], [0.5, 0.0, 0.0], atol=1e-12)
        self.assertTrue(np.all(profile.data[:, self.grid.origin_mask] == 0.0))

    def test_axial_trace_at_off_axis_node(self):
        trace = curl_of_degree0_potential(axial_potential(2), self.rule)
        profile = sample_trace(trace, self.grid)
        x = np.array([1.0, 1.5, 2.0])
        r = np.linalg.norm(x)
        expected = np.array([-x[1] * x[2], x[0] * x[2], 0.0]) / r ** 3
        got = profile.data[(slice(None),) + self.grid.index_of(x)]
        np.testing.assert_allclose(got, expected, atol=1e-3 * np.max(np.abs(expected)))

    def test_exact_scaling_between_node_pairs(self):
        trace = curl_of_degree0_potential(axial_potential(2), self.rule)
        profile = sample_trace(trace, self.grid)
        for x in [(0.5, 1.0, -1.0), (1.0, -0.5, 1.5), (-1.5, 0.5, 0.5)]:
            near = profile.data[(slice(None),) + self.grid.index_of(x)]
            far = profile.data[(slice(None),) + self.grid.index_of(2 * np.array(x))]
            np.testing.assert_allclose(far, near / 2.0, rtol=1e-12, atol=1e-15)

    def test_profile_class_follows_trace_shape(self):
        scalar = sample_trace(SphericalTrace(self.rule, np.ones((16, 32))), self.grid)
        tensor = sample_trace(SphericalTrace(self.rule, np.ones((16, 32, 3, 3))), self.grid)
        self.assertIsInstance(scalar, ScalarProfile)
        self.assertIsInstance(tensor, TensorProfile)


class SpectralDivergenceTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=3.0, n=16)
        self.x = self.grid.coordinates
        self.L = self.grid.half_width

    def test_constant_field(self):
        data = np.ones((3,) + self.grid.shape)
        self.assertLess(spectral_divergence(VectorProfile(self.grid, data)).max_abs, 1e-12)

    def test_transverse_mode_is_divergence_free(self):
        data = np.zeros((3,) + self.grid.shape)
        data[0] = np.sin(np.pi * self.x[1] / self.L)
        self.assertLess(spectral_divergence(VectorProfile(self.grid, data)).max_abs, 1e-12)

    def test_longitudinal_mode(self):
        data = np.zeros((3,) + self.grid.shape)
        data[0] = np.sin(np.pi * self.x[0] / self.L)
        summary = spectral_divergence(VectorProfile(self.grid, data))
        expected = np.pi / self.L * np.cos(np.pi * self.x[0] / self.L)
        np.testing.assert_allclose(summary.samples, expected, atol=1e-12)

    def test_tensor_columns(self):
        data = np.zeros((3, 3) + self.grid.shape)
        data[0, 2] = np.sin(np.pi * self.x[0] / self.L)
        summary = spectral_divergence(TensorProfile(self.grid, data))
        self.assertEqual(summary.samples.shape, (3,) + self.grid.shape)
        self.assertLess(np.max(np.abs(summary.samples[:2])), 1e-12)
        self.assertAlmostEqual(summary.max_abs, np.pi / self.L, places=10)


class StencilCalculusTests(SimpleTestCase):
    def test_derivatives_of_smooth_bump_in_interior(self):
        grid = GridSpec(half_width=6.0, n=48)
        x = grid.coordinates
        f = np.exp(-np.sum(x ** 2, axis=0) / 2.0)
        calc = StencilCalculus(grid)
        inner = grid.interior(calc.band)
        np.testing.assert_allclose(calc.derivative(f, 1)[inner], (-x[1] * f)[inner], atol=5e-4)
        expected_lap = (np.sum(x ** 2, axis=0) - 3.0) * f
        np.testing.assert_allclose(calc.laplacian(f)[inner], expected_lap[inner], atol=5e-3)


class ProfileSamplerTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=4.0, n=16)
        self.data = 1.0 / self.grid.japanese_bracket ** 2

    def test_reproduces_node_values(self):
        sampler = ProfileSampler(self.grid, self.data, decay=2.0)
        inner = np.max(np.abs(self.grid.coordinates), axis=0) <= sampler.inner
        np.testing.assert_allclose(sampler.on_grid(1.0)[inner], self.data[inner], atol=1e-12)

    def test_decay_continuation_outside_box(self):
        sampler = ProfileSampler(self.grid, self.data, decay=2.0)
        value = sampler(np.array([[30.0, 0.0, 0.0]]))
        self.assertAlmostEqual(float(value[0]), 1.0 / (1.0 + 900.0), delta=1e-4)


class XGammaNormTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=4.0, n=16)

    def test_zero_field(self):
        self.assertEqual(x_gamma_norm(VectorProfile.zeros(self.grid), 0.5).value, 0.0)

    def test_weight_cancels(self):
        for gamma in (0.25, 0.5, 1.0):
            data = np.zeros((3,) + self.grid.shape)
            data[0] = self.grid.japanese_bracket ** -(1.0 + gamma)
            self.assertAlmostEqual(x_gamma_norm(VectorProfile(self.grid, data), gamma).value, 1.0)

    def test_gaussian_against_radial_maximum(self):
        data = np.zeros((3,) + self.grid.shape)
        data[0] = np.exp(-self.grid.radius ** 2)
        r = np.linspace(0.0, 4.0, 40001)
        oracle = np.max((1.0 + r ** 2) ** 0.75 * np.exp(-r ** 2))
        norm = x_gamma_norm(VectorProfile(self.grid, data), 0.5)
        self.assertAlmostEqual(norm.value, oracle, places=10)
        self.assertEqual(norm.attained_at, (0.0, 0.0, 0.0))

    def test_homogeneity_and_triangle_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = VectorProfile(self.grid, rng.standard_normal((3,) + self.grid.shape))
            b = VectorProfile(self.grid, rng.standard_normal((3,) + self.grid.shape))
            c = rng.uniform(-3, 3)
            self.assertAlmostEqual(x_gamma_norm(a * c).value, abs(c) * x_gamma_norm(a).value)
            self.assertLessEqual(x_gamma_norm(a + b).value,
                                 x_gamma_norm(a).value + x_gamma_norm(b).value + 1e-12)

    def test_masked_nodes_skipped(self):
        data = np.zeros((3,) + self.grid.shape)
        data[0][self.grid.origin_mask] = 100.0
        profile = VectorProfile(self.grid, data, masked=True)
        self.assertEqual(x_gamma_norm(profile).value, 0.0)

    def test_x_gamma4_sums_columns(self):
        v = VectorProfile.zeros(self.grid)
        H = np.zeros((3, 3) + self.grid.shape)
        H[:, 1] = self.grid.japanese_bracket ** -1.5
        self.assertAlmostEqual(x_gamma4_norm(v, TensorProfile(self.grid, H), 0.5), np.sqrt(3.0))

    def test_grid_mismatch(self):
        other = GridSpec(half_width=5.0, n=16)
        with self.assertRaises(GridMismatch):
            VectorProfile.zeros(self.grid) + VectorProfile.zeros(other)


class DumpTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=2.0, n=8)
        rng = np.random.default_rng(3)
        self.vector = VectorProfile(self.grid, rng.standard_normal((3,) + self.grid.shape), masked=True)
        self.tensor = TensorProfile(self.grid, rng.standard_normal((3, 3) + self.grid.shape))

    def test_header_and_x_fastest_order(self):
        raw = encode_profile(self.vector)
        header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
        self.assertEqual(header['magic'], b'SSVF1')
        self.assertEqual(int(header['n']), 8)
        self.assertEqual(int(header['rank']), 1)
        self.assertEqual(int(header['masked']), 1)
        body = np.frombuffer(raw[HEADER.itemsize:], dtype='<f8')
        self.assertEqual(body[0], self.vector.data[0, 0, 0, 0])
        self.assertEqual(body[1], self.vector.data[0, 1, 0, 0])
        self.assertEqual(body[8], self.vector.data[0, 0, 1, 0])
        self.assertEqual(body[8 ** 3], self.vector.data[1, 0, 0, 0])

    def test_tensor_file_roundtrip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_profile(Path(tmp) / 'H.ssvf', self.tensor)
            loaded = read_profile(path)
        self.assertIsInstance(loaded, TensorProfile)
        np.testing.assert_array_equal(loaded.data, self.tensor.data)

    def test_rejects_bad_magic_and_truncation(self):
        raw = encode_profile(self.vector)
        with self.assertRaises(DumpFormatError):
            decode_profile(b'SSVF2' + raw[5:])
        with self.assertRaises(DumpFormatError):
            decode_profile(raw[:-8])
        with self.assertRaises(DumpFormatError):
            decode_profile(raw, GridSpec(half_width=3.0, n=8))
