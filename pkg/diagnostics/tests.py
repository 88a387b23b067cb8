import itertools

import numpy as np
from django.test import SimpleTestCase
from scipy.special import erf

from evolver.analysis import cutoff_state, temporal_order_ratio
from evolver.integrator import EvolveConfig, EvolveState, evolve
from fields.grid import GridSpec
from fields.profiles import ScalarProfile, TensorProfile, VectorProfile
from fields.spectral import FourierWorkspace
from profiles.solver import ProfileState, SolveConfig, picard_solve
from profiles.tests import small_problem

from .decay import decay_exponent_fit, radial_decay_table
from .exceptions import (CylinderOutOfRange, DiagnosticsError, InsufficientShells, InvalidExponent,
                         NonFiniteReport, SupportViolation)
from .reconstruct import reconstruct_state, self_similar_reconstruct
from .report import DiagnosticsReport
from .residuals import profile_residual, residual_fields, stress_identity_residual
from .spacetime import (BumpFunction, ParabolicCylinder, SpaceTimeSamples, epsilon_regularity_Y,
                        local_energy_residual, smallness_condition)
from .suite import VerifyThresholds, verify_solution


def erf_profile(grid):
    r = grid.radius
    with np.errstate(invalid='ignore', divide='ignore'):
        values = np.where(r > 0, erf(r / 2) / np.where(r > 0, r, 1.0), 1.0 / np.sqrt(np.pi))
    return values


def sample_fields(grid, times, fn):
    """Stack fn(x1, x2, x3, t) -> (u, F, p) over the sample times"""
    x1, x2, x3 = grid.coordinates
    parts = [fn(x1, x2, x3, t) for t in times]
    return SpaceTimeSamples(grid, np.array(times), *(np.stack(p) for p in zip(*parts)))


def smooth_fields(x1, x2, x3, t):
    u = np.stack([np.sin(x2) * t, x1 * x3, np.cos(x1 + t)])
    F = np.stack([np.stack([x1 * t, np.sin(x3), x2 ** 2]),
                  np.stack([np.cos(x2), x3 * t, np.zeros_like(x1)]),
                  np.stack([x1 * x2, np.ones_like(x1), np.sin(x1 - t)])])
    p = x1 ** 2 * t + np.cos(x3)
    return u, F, p


def brute_force_mean(samples, cyl, pointwise):
    """Independent loop evaluation of the cylinder mean of pointwise(k, index)"""
    grid, times = samples.grid, samples.times
    inside = [k for k, t in enumerate(times) if cyl.t0 - cyl.r ** 2 - 1e-9 <= t <= cyl.t0 + 1e-9]
    weights = {}
    for pos, k in enumerate(inside):
        left = times[k] - times[inside[pos - 1]] if pos > 0 else 0.0
        right = times[inside[pos + 1]] - times[k] if pos + 1 < len(inside) else 0.0
        weights[k] = 0.5 * (left + right)
    total, measure = 0.0, 0.0
    axis = grid.axis
    for i, j, l in itertools.product(range(grid.n), repeat=3):
        x = (axis[i], axis[j], axis[l])
        if sum((x[c] - cyl.x0[c]) ** 2 for c in range(3)) > cyl.r ** 2:
            continue
        for k in inside:
            total += weights[k] * pointwise(k, (i, j, l))
            measure += weights[k]
    return total / measure


class ProfileResidualTests(SimpleTestCase):
    def test_all_zero(self):
        grid = GridSpec(half_width=4.0, n=16)
        zero_v, zero_H = VectorProfile.zeros(grid), TensorProfile.zeros(grid)
        residual = profile_residual(zero_v, zero_H, zero_v, zero_H, sigma=1.0)
        for summary in residual.values():
            self.assertEqual(summary.max_abs, 0.0)
            self.assertEqual(summary.l2, 0.0)

    def test_caloric_profile_solves_linear_momentum(self):
        grid = GridSpec(half_width=8.0, n=64)
        U0 = VectorProfile(grid, np.stack([erf_profile(grid), np.zeros(grid.shape), np.zeros(grid.shape)]))
        residual = profile_residual(VectorProfile.zeros(grid), TensorProfile.zeros(grid),
                                    U0, TensorProfile.zeros(grid), sigma=0.0)
        self.assertLess(residual['momentum'].max_abs, 1e-4)
        self.assertEqual(residual['deformation'].max_abs, 0.0)

    def test_manufactured_fields_against_closed_form(self):
        grid = GridSpec(half_width=6.0, n=48)
        x1, x2, x3 = grid.coordinates
        r2 = x1 ** 2 + x2 ** 2 + x3 ** 2
        g = np.exp(-r2)
        zero = np.zeros(grid.shape)
        U = VectorProfile(grid, np.stack([g, zero, zero]))
        G_data = np.zeros((3, 3) + grid.shape)
        G_data[1, 0] = g
        G = TensorProfile(grid, G_data)

        blocks = residual_fields(VectorProfile.zeros(grid), TensorProfile.zeros(grid), U, G, sigma=1.0,
                                 method='spectral', pressure=ScalarProfile.zeros(grid))

        linear = (5.5 - 3.0 * r2) * g - 2.0 * x1 * g ** 2
        momentum = np.stack([linear, 2.0 * x2 * g ** 2, zero])
        deformation = np.zeros((3, 3) + grid.shape)
        deformation[0, 0] = 2.0 * x2 * g ** 2
        deformation[1, 0] = linear
        expected = {'momentum': momentum, 'divergence': -2.0 * x1 * g, 'deformation': deformation}
        for name, oracle in expected.items():
            error = np.max(np.abs(blocks[name] - oracle)) / np.max(np.abs(oracle))
            self.assertLess(error, 1e-8, name)

    def test_unknown_method(self):
        grid = GridSpec(half_width=4.0, n=8)
        with self.assertRaises(ValueError):
            profile_residual(VectorProfile.zeros(grid), TensorProfile.zeros(grid),
                             VectorProfile.zeros(grid), TensorProfile.zeros(grid), 1.0, method='finite')


class StressIdentityTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=np.pi, n=16)
        self.x1, self.x2, self.x3 = self.grid.coordinates

    def test_divergence_free_columns(self):
        x, y, z = self.x1, self.x2, self.x3
        column = np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), 0 * x])
        rotated = np.stack([0 * x, np.sin(y) * np.cos(z), -np.cos(y) * np.sin(z)])
        G = TensorProfile(self.grid, np.stack([column, rotated, 0.5 * column], axis=1))
        self.assertLess(stress_identity_residual(G), 1e-12)

    def test_compressible_columns_break_identity(self):
        data = np.zeros((3, 3) + self.grid.shape)
        data[0, 0] = np.sin(self.x1)
        data[1, 0] = np.cos(self.x2)
        self.assertGreater(stress_identity_residual(TensorProfile(self.grid, data)), 1e-3)


class EpsilonRegularityTests(SimpleTestCase):
    def test_constants_give_zero(self):
        grid = GridSpec(half_width=2.0, n=16)
        samples = sample_fields(grid, [0.0, 0.5, 1.0], lambda x1, x2, x3, t: (
            np.stack([np.full_like(x1, 2.0), np.zeros_like(x1), np.full_like(x1, -1.0)]),
            np.full((3, 3) + x1.shape, 0.3), np.full_like(x1, 5.0)))
        self.assertAlmostEqual(epsilon_regularity_Y(samples, ParabolicCylinder((0, 0, 0), 1.0, 1.0)), 0.0,
                               places=12)

    def test_linear_field_matches_brute_force_and_closed_form(self):
        grid = GridSpec(half_width=1.5, n=32)
        samples = sample_fields(grid, [0.0, 0.5, 1.0], lambda x1, x2, x3, t: (
            np.stack([x1, 0 * x1, 0 * x1]), np.zeros((3, 3) + x1.shape), np.zeros_like(x1)))
        cyl = ParabolicCylinder((0, 0, 0), 1.0, 1.0)
        value = epsilon_regularity_Y(samples, cyl)

        mean_v = brute_force_mean(samples, cyl, lambda k, idx: samples.u[(k, 0) + idx])
        oracle = brute_force_mean(samples, cyl, lambda k, idx: abs(samples.u[(k, 0) + idx] - mean_v) ** 3) ** (1 / 3)
        self.assertLess(abs(value - oracle) / oracle, 1e-8)
        self.assertLess(abs(value - 0.5), 0.025)

    def test_parabolic_scaling(self):
        lam = 2.0
        grid = GridSpec(half_width=2.0, n=16)
        times = np.linspace(0.0, 1.0, 5)
        samples = sample_fields(grid, times, smooth_fields)

        def rescaled(x1, x2, x3, t):
            u, F, p = smooth_fields(lam * x1, lam * x2, lam * x3, lam ** 2 * t)
            return lam * u, lam * F, lam ** 2 * p

        small = sample_fields(GridSpec(half_width=2.0 / lam, n=16), times / lam ** 2, rescaled)
        cyl = ParabolicCylinder((0, 0, 0), 1.0, 0.9)
        original = epsilon_regularity_Y(samples, cyl)
        scaled = epsilon_regularity_Y(small, cyl.rescaled(lam))
        self.assertLess(abs(scaled - lam * original) / (lam * original), 1e-10)

    def test_cylinder_out_of_range(self):
        samples = SpaceTimeSamples.zeros(GridSpec(half_width=1.0, n=8), [0.0, 1.0])
        with self.assertRaises(CylinderOutOfRange):
            epsilon_regularity_Y(samples, ParabolicCylinder((0, 0, 0), 1.0, 0.95))
        with self.assertRaises(CylinderOutOfRange):
            epsilon_regularity_Y(samples, ParabolicCylinder((0, 0, 0), 2.0, 0.5))
        with self.assertRaises(CylinderOutOfRange):
            epsilon_regularity_Y(samples, ParabolicCylinder((0, 0, 0), 1.0, 0.5).rescaled(0.4))


class SmallnessConditionTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=2.0, n=16)
        self.cyl = ParabolicCylinder((0.25, 0, 0), 1.0, 1.0)

    def test_zero(self):
        samples = SpaceTimeSamples.zeros(self.grid, [0.0, 0.5, 1.0])
        self.assertEqual(smallness_condition(samples, self.cyl, 6.0), 0.0)

    def test_constant_velocity(self):
        samples = sample_fields(self.grid, [0.0, 1.0], lambda x1, x2, x3, t: (
            np.stack([np.full_like(x1, -0.7), 0 * x1, 0 * x1]), np.zeros((3, 3) + x1.shape), np.zeros_like(x1)))
        self.assertAlmostEqual(smallness_condition(samples, self.cyl, 6.0), 0.7, places=12)

    def test_smooth_fields_match_brute_force(self):
        samples = sample_fields(self.grid, [0.0, 0.25, 0.5, 0.75, 1.0], smooth_fields)
        a = samples.u[:, ::-1].copy()
        M = 0.5 * samples.F
        m = 7.0
        value = smallness_condition(samples, self.cyl, m, a=a, M=M)

        def term(fn, power):
            return brute_force_mean(samples, self.cyl, fn) ** (1.0 / power)

        oracle = (term(lambda k, idx: np.linalg.norm(samples.u[(k, slice(None)) + idx]) ** 3, 3)
                  + term(lambda k, idx: np.linalg.norm(samples.F[(k, slice(None), slice(None)) + idx]) ** 3, 3)
                  + term(lambda k, idx: abs(samples.p[(k,) + idx]) ** 1.5, 1.5)
                  + term(lambda k, idx: np.linalg.norm(a[(k, slice(None)) + idx]) ** m, m)
                  + term(lambda k, idx: np.linalg.norm(M[(k, slice(None), slice(None)) + idx]) ** m, m))
        self.assertLess(abs(value - oracle) / oracle, 1e-8)

    def test_exponent_must_exceed_five(self):
        samples = SpaceTimeSamples.zeros(self.grid, [0.0, 1.0])
        with self.assertRaises(InvalidExponent):
            smallness_condition(samples, self.cyl, 5.0)


def taylor_green_state(grid, u_amp, F_amp, sigma):
    x, y, z = grid.coordinates
    u = u_amp * np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), 0 * x])
    first = F_amp * np.stack([0 * x, np.sin(y) * np.cos(z), -np.cos(y) * np.sin(z)])
    second = F_amp * np.stack([np.sin(z), np.cos(x), np.sin(y)])
    F = np.stack([first, second, np.zeros_like(first)], axis=1)
    return EvolveState(VectorProfile(grid, u), TensorProfile(grid, F), 0.0, sigma)


def trig_fields(x1, x2, x3, t):
    c, d = 1.0 + t, 0.5 * t
    u = c * np.stack([np.sin(x2), np.cos(x3), np.sin(x1)])
    zero = np.zeros_like(x1)
    F = d * np.stack([np.stack([np.cos(x1), zero, zero]),
                      np.stack([zero, np.cos(x2), zero]),
                      np.stack([zero, zero, np.cos(x3)])])
    p = t * np.cos(x1 + x2)
    return u, F, p


def trig_gradient_density(x, t):
    """|grad u|^2 + |grad F|^2 of trig_fields, differentiated by hand"""
    c, d = 1.0 + t, 0.5 * t
    return (c ** 2 * (np.cos(x[1]) ** 2 + np.sin(x[2]) ** 2 + np.cos(x[0]) ** 2)
            + d ** 2 * (np.sin(x[0]) ** 2 + np.sin(x[1]) ** 2 + np.sin(x[2]) ** 2))


def brute_force_local_energy(samples, phi, sigma, ws, gradient_density):
    """Node-by-node evaluation of the local energy functional with trapezoid weights in time"""
    grid, times = samples.grid, samples.times
    psi = phi.spatial(grid)
    grad_psi = ws.gradient(psi)
    lap_psi = ws.laplacian(psi)
    inside = [k for k, t in enumerate(times) if phi.t_start - 1e-9 <= t <= phi.t_end + 1e-9]
    span = phi.t_end - phi.t_start
    h3 = grid.spacing ** 3
    axis = grid.axis

    def chi(t):
        return np.sin(0.5 * np.pi * (t - phi.t_start) / span) ** 2

    def chi_rate(t):
        return 0.5 * np.pi / span * np.sin(np.pi * (t - phi.t_start) / span)

    def local_energy(k, node):
        u = samples.u[(k, slice(None)) + node]
        F = samples.F[(k, slice(None), slice(None)) + node]
        return sum(u[a] ** 2 for a in range(3)) + sum(F[a, b] ** 2 for a in range(3) for b in range(3))

    boundary, dissipation, flux = 0.0, 0.0, 0.0
    for pos, k in enumerate(inside):
        left = times[k] - times[inside[pos - 1]] if pos > 0 else 0.0
        right = times[inside[pos + 1]] - times[k] if pos + 1 < len(inside) else 0.0
        w, t = 0.5 * (left + right), times[k]
        for node in itertools.product(range(grid.n), repeat=3):
            x = tuple(axis[i] for i in node)
            u = samples.u[(k, slice(None)) + node]
            F = samples.F[(k, slice(None), slice(None)) + node]
            e = local_energy(k, node)
            g = [grad_psi[(a,) + node] for a in range(3)]
            u_dot_g = sum(u[a] * g[a] for a in range(3))
            stress = sum(F[a, m] * F[b, m] * u[a] * g[b]
                         for a in range(3) for b in range(3) for m in range(3))
            dissipation += w * 2.0 * chi(t) * psi[node] * gradient_density(x, t) * h3
            flux += w * (chi_rate(t) * psi[node] * e + chi(t) * lap_psi[node] * e
                         + sigma * chi(t) * e * u_dot_g + 2.0 * chi(t) * samples.p[(k,) + node] * u_dot_g
                         - 2.0 * sigma * chi(t) * stress) * h3
            if pos == 0:
                boundary -= chi(t) * psi[node] * e * h3
            if pos == len(inside) - 1:
                boundary += chi(t) * psi[node] * e * h3
    return boundary + dissipation - flux, dissipation


class LocalEnergyTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=np.pi, n=16)
        self.ws = FourierWorkspace(self.grid)
        self.bump = BumpFunction((0.0, 0.0, 0.0), 2.0, 0.0, 0.5)

    def trajectory(self, u_amp, F_amp, sigma):
        state = taylor_green_state(self.grid, u_amp, F_amp, sigma)
        result = evolve(state, 0.0, 0.5, EvolveConfig(dt=0.005, monitor=False, record_every=1), self.ws)
        return SpaceTimeSamples.from_states(result.states, self.ws)

    def test_zero_fields(self):
        samples = SpaceTimeSamples.zeros(self.grid, np.linspace(0.0, 0.5, 6))
        self.assertEqual(local_energy_residual(samples, self.bump, 1.0, self.ws), 0.0)

    def test_heat_flow_balances(self):
        residual = local_energy_residual(self.trajectory(1.0, 0.5, 0.0), self.bump, 0.0, self.ws)
        self.assertLess(abs(residual), 1e-3)

    def test_small_nonlinear_flow(self):
        residual = local_energy_residual(self.trajectory(0.1, 0.05, 1.0), self.bump, 1.0, self.ws)
        self.assertLessEqual(residual, 1e-3)
        self.assertLess(abs(residual), 1e-2)

    def test_matches_node_by_node_quadrature(self):
        times = np.linspace(0.0, 0.5, 5)
        samples = sample_fields(self.grid, times, trig_fields)
        for sigma in (0.0, 1.0):
            residual = local_energy_residual(samples, self.bump, sigma, self.ws, relative=False)
            expected, dissipation = brute_force_local_energy(samples, self.bump, sigma, self.ws,
                                                             trig_gradient_density)
            self.assertGreater(abs(expected), 1e-6)
            np.testing.assert_allclose(residual, expected, rtol=1e-8)
            relative = local_energy_residual(samples, self.bump, sigma, self.ws)
            np.testing.assert_allclose(relative, expected / dissipation, rtol=1e-8)

    def test_support_violation(self):
        samples = SpaceTimeSamples.zeros(self.grid, np.linspace(0.0, 0.5, 6))
        with self.assertRaises(SupportViolation):
            local_energy_residual(samples, BumpFunction((1.0, 0, 0), 2.5, 0.0, 0.5))
        with self.assertRaises(SupportViolation):
            local_energy_residual(samples, BumpFunction((0, 0, 0), 1.0, 0.0, 0.8))


class DecayFitTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=16.0, n=32)

    def power_law(self, exponent):
        magnitude = self.grid.japanese_bracket ** -exponent
        zero = np.zeros(self.grid.shape)
        return VectorProfile(self.grid, np.stack([magnitude, zero, zero]))

    def test_exact_power_law(self):
        fit = decay_exponent_fit(self.power_law(2.0), gamma=0.5)
        self.assertAlmostEqual(fit.exponent, 2.0, delta=0.05)
        self.assertGreater(fit.r_squared, 0.999)
        self.assertTrue(fit.passed)

    def test_boundary_case(self):
        fit = decay_exponent_fit(self.power_law(1.5), gamma=0.5)
        self.assertAlmostEqual(fit.exponent, 1.5, delta=0.05)
        self.assertTrue(fit.passed)

    def test_slow_decay_fails(self):
        self.assertFalse(decay_exponent_fit(self.power_law(1.0), gamma=0.5).passed)

    def test_table_columns(self):
        table = radial_decay_table(self.power_law(2.0))
        self.assertEqual(table.shape[1], 2)
        self.assertTrue(np.all(np.diff(table[:, 0]) > 0))
        self.assertTrue(np.all(np.diff(table[:, 1]) < 0))

    def test_zero_profile_has_no_shells(self):
        with self.assertRaises(InsufficientShells):
            decay_exponent_fit(VectorProfile.zeros(self.grid))

    def test_flat_background_is_separated(self):
        profile = self.power_law(2.0)
        data = profile.data.copy()
        data[0] += 0.01
        profile = profile.with_data(data)
        fit = decay_exponent_fit(profile, gamma=0.5)
        self.assertLess(fit.raw_exponent, 1.4)
        self.assertAlmostEqual(fit.exponent, 2.0, delta=0.1)
        self.assertGreater(fit.background, 0.0)
        self.assertTrue(fit.passed)

    def test_pure_power_law_has_no_background(self):
        fit = decay_exponent_fit(self.power_law(1.0), gamma=0.5)
        self.assertAlmostEqual(fit.exponent, fit.raw_exponent, delta=0.05)
        self.assertLess(fit.background, 1e-2)


class ReconstructTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=8.0, n=32)
        self.W = ScalarProfile(self.grid, erf_profile(self.grid))
        self.zero = ScalarProfile.zeros(self.grid)

    def test_erf_profile_at_later_time(self):
        u, F = self_similar_reconstruct(self.zero, None, self.W, None, [[0.0, 0.0, 0.0]], 4.0)
        self.assertIsNone(F)
        self.assertAlmostEqual(float(u[0]), 0.2820947918, places=9)

    def test_unit_time_returns_nodes(self):
        idx = [(16, 16, 16), (12, 18, 20), (20, 10, 15)]
        points = [[self.grid.axis[i] for i in node] for node in idx]
        u, _ = self_similar_reconstruct(self.zero, None, self.W, None, points, 1.0)
        np.testing.assert_allclose(u, [self.W.data[node] for node in idx], rtol=1e-12)

    def test_scaling_identity(self):
        points = np.array([[0.5, -1.0, 1.5], [2.0, 0.0, -0.5]])
        u, _ = self_similar_reconstruct(self.zero, None, self.W, None, points, 1.5)
        u2, _ = self_similar_reconstruct(self.zero, None, self.W, None, 2.0 * points, 6.0)
        np.testing.assert_allclose(u2, 0.5 * u, rtol=1e-12)

    def test_nonpositive_time(self):
        for t in (0.0, -1.0):
            with self.assertRaises(DiagnosticsError):
                self_similar_reconstruct(self.zero, None, self.W, None, [[0, 0, 0]], t)

    def test_state_on_grid(self):
        v, H = VectorProfile.zeros(self.grid), TensorProfile.zeros(self.grid)
        U0 = VectorProfile(self.grid, np.stack([self.W.data] * 3))
        state = reconstruct_state(v, H, U0, H, 1.0)
        inner = self.grid.interior(3)
        np.testing.assert_allclose(state.u.data[:, inner], U0.data[:, inner], rtol=1e-12)
        self.assertEqual(state.F.max_abs(), 0.0)


class ReportTests(SimpleTestCase):
    def test_flat_text_and_passes(self):
        report = DiagnosticsReport(profile_residual={'momentum': 1e-5}, energy_residual=2e-3,
                                   Y_values=((0.5, 0.1),), passes={'energy_identity': True})
        text = report.as_text()
        self.assertIn('profile_residual.momentum = 1e-05', text)
        self.assertIn('Y.0.radius = 0.5', text)
        self.assertIn('pass.energy_identity = true', text)
        self.assertTrue(report.passed)

    def test_non_finite_entries_rejected(self):
        with self.assertRaises(NonFiniteReport):
            DiagnosticsReport(energy_residual=float('nan'))


class VerifySolutionTests(SimpleTestCase):
    def test_linear_solution_report(self):
        problem = small_problem()
        report = verify_solution(problem, problem.zero_state(0.0), EvolveConfig(dt=0.1, monitor=False))
        self.assertIsNone(report.decay_fit)
        self.assertTrue(report.passes['divergence'])
        self.assertEqual(len(report.Y_values), 2)
        self.assertIn('self_similarity', report.passes)
        self.assertTrue(all(np.isfinite(v) for v in report.flat().values() if isinstance(v, float)))

    def test_deformation_block_counts_toward_residual_flag(self):
        problem = small_problem()
        grid = problem.grid
        a = np.pi / grid.half_width
        x, y, z = grid.coordinates
        column = 0.1 * np.stack([np.sin(a * x) * np.cos(a * y) * np.cos(a * z),
                                 -np.cos(a * x) * np.sin(a * y) * np.cos(a * z), 0 * x])
        H_hat = TensorProfile(grid, np.stack([column, np.zeros_like(column), np.zeros_like(column)], axis=1))
        state = ProfileState(VectorProfile.zeros(grid), H_hat, 0.0)
        blocks = {name: s.max_abs for name, s in
                  profile_residual(state.v_hat, H_hat, problem.U0, problem.G0, 0.0).items()}
        self.assertGreater(blocks['deformation'], 10 * blocks['momentum'])

        limit = 2 * max(blocks['momentum'], blocks['divergence'])
        report = verify_solution(problem, state, EvolveConfig(dt=0.1, monitor=False),
                                 thresholds=VerifyThresholds(profile_residual=limit))
        self.assertFalse(report.passes['profile_residual'])
        self.assertFalse(report.passed)


class SmallDataCrossValidationTests(SimpleTestCase):
    """A converged sigma = 1 profile for a small datum, checked against its own time evolution"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = small_problem(0.01, n=32, half_width=8.0, nodes=16)
        solved = picard_solve(cls.problem.zero_state(1.0), cls.problem, SolveConfig(sigma_schedule=(1.0,)))
        cls.converged = solved.converged
        cls.state = solved.state
        cls.report = verify_solution(cls.problem, cls.state, EvolveConfig(dt=0.02, monitor=False), t0=1.0, t1=1.5)

    def test_profile_converged_with_small_residual(self):
        self.assertTrue(self.converged)
        self.assertEqual(self.state.sigma, 1.0)
        self.assertTrue(self.report.passes['profile_residual'], self.report.profile_residual)
        self.assertTrue(self.report.passes['divergence'])

    def test_correction_decays(self):
        fit = self.report.decay_fit
        self.assertIsNotNone(fit)
        self.assertGreaterEqual(fit.exponent, 1.4)
        self.assertTrue(self.report.passes['decay'])

    def test_evolution_stays_self_similar(self):
        self.assertLess(self.report.self_similarity_error, 2e-2)
        self.assertTrue(self.report.passes['self_similarity'])

    def test_energy_identity(self):
        self.assertLess(self.report.energy_residual, 1e-2)
        self.assertTrue(self.report.passes['energy_identity'])

    def test_every_check_passes(self):
        self.assertTrue(self.report.passed, self.report.passes)

    def test_step_halving_is_second_order(self):
        problem = self.problem
        start = cutoff_state(reconstruct_state(self.state.v_hat, self.state.H_hat, problem.U0, problem.G0,
                                               1.0, 1.0), problem.ws)

        def run(dt):
            return evolve(start, 1.0, 1.4, EvolveConfig(dt=dt, monitor=False), problem.ws).final

        ratio, e1, e2 = temporal_order_ratio(run, 0.1)
        self.assertGreater(e1, e2)
        self.assertTrue(3.0 <= ratio <= 5.0, ratio)
