from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from caloric.services import CaloricProfile
from fields.exceptions import GridMismatch
from fields.grid import GridSpec
from fields.norms import x_gamma4_norm, x_gamma_norm
from fields.profiles import TensorProfile, VectorProfile
from fields.spectral import spectral_divergence
from fields.traces import DatumSpec, SphericalRule, build_datum
from stokes.duhamel import DuhamelSchedule
from stokes.exceptions import DuhamelQuadratureError

from .exceptions import AprioriBoundExceeded, ContinuationStalled, MaxItersExceeded
from .solver import (FixedPointResult, ProfileProblem, SolveConfig, apply_T, default_damping,
                     picard_solve, sigma_continuation)
from .sources import assemble_sources


def small_problem(amplitude=0.01, n=16, half_width=8.0, nodes=12):
    grid = GridSpec(half_width=half_width, n=n, sphere_polar=16, sphere_azimuth=32)
    datum = build_datum(DatumSpec(amplitude=amplitude), SphericalRule.for_grid(grid))
    return ProfileProblem.build(datum, grid, schedule=DuhamelSchedule(nodes), use_cache=False)


class AssembleSourcesTests(SimpleTestCase):
    def setUp(self):
        self.grid = GridSpec(half_width=4.0, n=8)
        self.rng = np.random.default_rng(2)

    def random_vector(self):
        return VectorProfile(self.grid, self.rng.standard_normal((3,) + self.grid.shape))

    def random_tensor(self):
        return TensorProfile(self.grid, self.rng.standard_normal((3, 3) + self.grid.shape))

    def test_all_zero(self):
        v, H = VectorProfile.zeros(self.grid), TensorProfile.zeros(self.grid)
        sources = assemble_sources(v, H, CaloricProfile.zeros_like(v), CaloricProfile.zeros_like(H))
        self.assertEqual(sources.q_hat.max_abs(), 0.0)
        self.assertEqual(sources.momentum_flux.max_abs(), 0.0)
        self.assertTrue(all(Q.max_abs() == 0.0 for Q in sources.Q_hat))

    def test_zero_correction_gives_caloric_products(self):
        U0, G0 = self.random_vector(), self.random_tensor()
        v, H = VectorProfile.zeros(self.grid), TensorProfile.zeros(self.grid)
        sources = assemble_sources(v, H, U0, G0)
        expected = (np.einsum('i...,j...->ij...', U0.data, U0.data)
                    + np.einsum('ik...,jk...->ij...', G0.data, G0.data))
        np.testing.assert_array_equal(sources.q_hat.data, expected)

    def test_symmetry_and_antisymmetry(self):
        sources = assemble_sources(self.random_vector(), self.random_tensor(),
                                   self.random_vector(), self.random_tensor())
        q = sources.q_hat.data
        np.testing.assert_allclose(q, np.swapaxes(q, 0, 1), atol=1e-14)
        for Q in sources.Q_hat:
            np.testing.assert_allclose(Q.data, -np.swapaxes(Q.data, 0, 1), atol=1e-14)

    def test_column_flux_formula(self):
        U0, G0 = self.random_vector(), self.random_tensor()
        sources = assemble_sources(VectorProfile.zeros(self.grid), TensorProfile.zeros(self.grid), U0, G0)
        U, G = U0.data, G0.data
        j, k, i = 1, 0, 2
        expected = G[k, j] * U[i] - U[k] * G[i, j]
        np.testing.assert_allclose(sources.Q_hat[j].data[k, i], expected, atol=1e-14)

    def test_grid_mismatch(self):
        other = GridSpec(half_width=5.0, n=8)
        with self.assertRaises(GridMismatch):
            assemble_sources(VectorProfile.zeros(other), TensorProfile.zeros(self.grid),
                             self.random_vector(), self.random_tensor())


class ApplyTTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = small_problem(0.01)
        cls.half_problem = small_problem(0.005)

    def test_linear_case_is_exactly_zero(self):
        state = self.problem.zero_state(0.0)
        v, H = apply_T(state, self.problem)
        self.assertEqual(v.max_abs(), 0.0)
        self.assertEqual(H.max_abs(), 0.0)

    def test_linear_in_sigma(self):
        v1, H1 = apply_T(self.problem.zero_state(1.0), self.problem)
        v3, H3 = apply_T(self.problem.zero_state(0.3), self.problem)
        np.testing.assert_allclose(v3.data, 0.3 * v1.data, atol=1e-12 * v1.max_abs())
        np.testing.assert_allclose(H3.data, 0.3 * H1.data, atol=1e-12 * H1.max_abs())

    def test_outputs_divergence_free(self):
        v, H = apply_T(self.problem.zero_state(1.0), self.problem)
        self.assertGreater(v.max_abs(), 0.0)
        self.assertGreater(H.max_abs(), 0.0)
        self.assertLess(spectral_divergence(v, self.problem.ws).relative, 1e-10)
        self.assertLess(spectral_divergence(H, self.problem.ws).relative, 1e-10)

    def test_quadratic_in_datum(self):
        v, _ = apply_T(self.problem.zero_state(1.0), self.problem)
        v_half, _ = apply_T(self.half_problem.zero_state(1.0), self.half_problem)
        ratio = x_gamma_norm(v).value / x_gamma_norm(v_half).value
        self.assertGreaterEqual(ratio, 3.5)
        self.assertLessEqual(ratio, 4.5)


class PicardSolveTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = small_problem(0.01)
        cls.cfg = SolveConfig(sigma_schedule=(1.0,), damping=1.0, tol_fixed_point=1e-8, max_iters=30)

    def test_linear_case_converges_in_one_step(self):
        v, H = apply_T(self.problem.zero_state(1.0), self.problem)
        init = self.problem.zero_state(0.0)
        init = init.from_vector(np.concatenate([v.data.ravel(), H.data.ravel()]))
        result = picard_solve(init, self.problem, self.cfg)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.iterations, 1)
        self.assertEqual(result.state.norm(), 0.0)

    def test_small_data_contracts(self):
        result = picard_solve(self.problem.zero_state(1.0), self.problem, self.cfg)
        self.assertIsInstance(result, FixedPointResult)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.iterations, 30)
        self.assertLess(result.max_contraction, 0.5)
        self.assertLess(result.residual, 1e-8 * max(1.0, result.norm))
        self.assertLess(spectral_divergence(result.state.v_hat, self.problem.ws).relative, 1e-10)

    def test_warm_restart(self):
        first = picard_solve(self.problem.zero_state(1.0), self.problem, self.cfg)
        again = picard_solve(first.state, self.problem, self.cfg)
        self.assertTrue(again.converged)
        self.assertLessEqual(again.iterations, 2)

    def test_anderson_mixing_converges_to_same_point(self):
        plain = picard_solve(self.problem.zero_state(1.0), self.problem, self.cfg)
        mixed_cfg = SolveConfig(sigma_schedule=(1.0,), damping=1.0, anderson_depth=2)
        mixed = picard_solve(self.problem.zero_state(1.0), self.problem, mixed_cfg)
        self.assertTrue(mixed.converged)
        gap = x_gamma4_norm(plain.state.v_hat - mixed.state.v_hat, plain.state.H_hat - mixed.state.H_hat)
        self.assertLess(gap, 1e-7)

    def test_iteration_cap_keeps_history(self):
        cfg = SolveConfig(sigma_schedule=(1.0,), damping=1.0, tol_fixed_point=1e-30, max_iters=2)
        with self.assertRaises(MaxItersExceeded) as ctx:
            picard_solve(self.problem.zero_state(1.0), self.problem, cfg)
        self.assertEqual(len(ctx.exception.result.residual_history), 3)
        self.assertFalse(ctx.exception.result.converged)

    def test_norm_ceiling(self):
        cfg = SolveConfig(sigma_schedule=(1.0,), damping=1.0, norm_ceiling=1e-12)
        with self.assertRaises(AprioriBoundExceeded):
            picard_solve(self.problem.zero_state(1.0), self.problem, cfg)


class SigmaContinuationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = small_problem(0.01)

    def test_linear_schedule(self):
        results = sigma_continuation(self.problem, SolveConfig(sigma_schedule=(0.0,)))
        self.assertEqual(len(results), 1)
        self.assertEqual(results[0].norm, 0.0)
        self.assertEqual(results[0].iterations, 0)

    def test_three_steps_and_denser_path(self):
        results = sigma_continuation(self.problem, SolveConfig(sigma_schedule=(0.0, 0.5, 1.0)))
        self.assertEqual([r.sigma for r in results], [0.0, 0.5, 1.0])
        self.assertTrue(all(r.converged for r in results))
        norms = [r.norm for r in results]
        self.assertEqual(norms, sorted(norms))

        dense = sigma_continuation(self.problem, SolveConfig(sigma_schedule=(0.0, 0.25, 0.5, 0.75, 1.0)))
        a, b = results[-1].state, dense[-1].state
        self.assertLess(x_gamma4_norm(a.v_hat - b.v_hat, a.H_hat - b.H_hat), 1e-7)

    def test_stalled_continuation_names_last_good_sigma(self):
        cfg = SolveConfig(sigma_schedule=(0.0, 1.0), tol_fixed_point=1e-30, max_iters=1, max_bisections=2)
        with self.assertRaises(ContinuationStalled) as ctx:
            sigma_continuation(self.problem, cfg)
        self.assertEqual(ctx.exception.last_good_sigma, 0.0)
        self.assertEqual(len(ctx.exception.results), 1)

    def test_quadrature_failure_stalls_with_last_good_sigma(self):
        cfg = SolveConfig(sigma_schedule=(0.0, 1.0), duhamel_tol=1e-16)
        with self.assertRaises(ContinuationStalled) as ctx:
            sigma_continuation(self.problem, cfg)
        self.assertEqual(ctx.exception.last_good_sigma, 0.0)
        self.assertEqual([r.sigma for r in ctx.exception.results], [0.0])
        self.assertIsInstance(ctx.exception.__cause__, DuhamelQuadratureError)

    def test_bisection_budget_is_per_target(self):
        converged = [0.0]

        def solve_short_steps(state, problem, cfg):
            if state.sigma - converged[-1] > 0.3:
                raise MaxItersExceeded(f'step to {state.sigma} too long')
            converged.append(state.sigma)
            return FixedPointResult(state, (0.0,), (), True, 0)

        cfg = SolveConfig(sigma_schedule=(0.0, 0.5, 1.0), max_bisections=1)
        with mock.patch('profiles.solver.picard_solve', side_effect=solve_short_steps):
            results = sigma_continuation(self.problem, cfg)
        self.assertEqual([r.sigma for r in results], [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_large_datum_converges_or_reports_last_good_sigma(self):
        problem = small_problem(0.5)
        self.assertAlmostEqual(problem.c_star, 1.0, places=6)
        try:
            results = sigma_continuation(problem, SolveConfig(sigma_schedule=(0.0, 0.5, 1.0)))
        except ContinuationStalled as e:
            self.assertIsNotNone(e.last_good_sigma)
            self.assertIn('last good sigma', str(e))
            self.assertTrue(e.results)
            self.assertTrue(all(r.converged for r in e.results))
            self.assertEqual(e.results[-1].sigma, e.last_good_sigma)
        else:
            self.assertEqual(results[-1].sigma, 1.0)
            self.assertTrue(all(r.converged for r in results))
            self.assertLess(results[-1].residual, 1e-8 * max(1.0, results[-1].norm))


class SolveConfigTests(SimpleTestCase):
    def test_rejects_bad_values(self):
        with self.assertRaises(ValueError):
            SolveConfig(sigma_schedule=(0.5, 0.2))
        with self.assertRaises(ValueError):
            SolveConfig(sigma_schedule=(0.0, 1.5))
        with self.assertRaises(ValueError):
            SolveConfig(damping=0.0)

    def test_damping_defaults_by_datum_size(self):
        self.assertEqual(default_damping(0.01), 1.0)
        self.assertEqual(default_damping(1.0), 0.5)
        self.assertEqual(SolveConfig(damping=0.7).damping_for(1.0), 0.7)
