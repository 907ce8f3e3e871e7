# -*- coding: utf-8 -*-
"""Test the problem bank, its oracles and the BDSDEProblem container."""

import dataclasses
import math
import unittest

import numpy as np

from bdsde import bank
from bdsde.exceptions import ConfigurationError, NumericalError, ValidationError
from bdsde.noise import NoiseModel
from bdsde.problem import BDSDEProblem, zero_terminal


class TestProblem(unittest.TestCase):
    """Test the problem container."""

    def test_mode_count(self):
        problem = bank.monotone_ode()
        self.assertRaises(ValidationError, dataclasses.replace, problem, noise=NoiseModel((1.0, 1.0)))
        self.assertRaises(ValidationError, dataclasses.replace, problem, alpha=(0.1, 0.1))
        self.assertRaises(ValidationError, dataclasses.replace, problem, C_j=(-1.0,))

    def test_dimension_mismatch(self):
        problem = bank.monotone_ode(dimension=1)
        self.assertRaises(ValidationError, dataclasses.replace, problem, noise=NoiseModel((1.0,), dimension=2))

    def test_defaults_fill_per_mode_constants(self):
        problem = bank.zero(eigenvalues=(1.0, 0.5, 0.25))
        self.assertEqual(problem.n_modes, 3)
        self.assertEqual(problem.C_j, (0.0, 0.0, 0.0))
        self.assertEqual(problem.sum_alpha, 0.0)

    def test_mu_conventions(self):
        infinite = bank.monotone_ode(mu=2.0)
        self.assertTrue(infinite.infinite)
        self.assertEqual(infinite.mu, 2.0)
        self.assertEqual(infinite.finite_mu, -2.0)
        finite = bank.monotone_ode(mu=2.0, horizon=1.0)
        self.assertEqual(finite.finite_mu, -2.0)

    def test_rung(self):
        rung = bank.ou_additive(mu=1.0).rung(3.0)
        self.assertEqual(rung.horizon, 3.0)
        self.assertEqual(rung.mu, -1.0)
        self.assertIs(rung.h, zero_terminal)
        self.assertFalse(rung.infinite)

    def test_evaluation_shapes(self):
        problem = bank.linear_g(alpha=0.2, gamma=0.5)
        x = np.zeros((4, 1))
        y = np.arange(4.0)
        z = np.ones((4, 1))
        np.testing.assert_allclose(problem.eval_f(0.0, x, y, z), -y)
        g = problem.eval_g(0.0, x, y, z)
        self.assertEqual(g.shape, (4, 1))
        np.testing.assert_allclose(g[:, 0], 0.5 * y + math.sqrt(0.1))
        np.testing.assert_allclose(problem.eval_h(np.array([[0.0], [math.pi / 2]])), [0.0, 1.0], atol=1e-15)

    def test_constant_f_broadcasts(self):
        problem = BDSDEProblem("scalar", lambda r, x, y, z: 2.0, (lambda r, x, y, z: 0.0,), zero_terminal,
                               bank.zero_diffusion(), NoiseModel((1.0,)))
        np.testing.assert_array_equal(problem.eval_f(0.0, np.zeros((3, 1)), np.zeros(3), np.zeros((3, 1))), 2.0)

    def test_non_finite_coefficients(self):
        problem = dataclasses.replace(bank.monotone_ode(), f=lambda r, x, y, z: np.log(y))
        with self.assertRaises(NumericalError) as ctx:
            problem.eval_f(0.0, np.zeros((3, 1)), np.array([1.0, -1.0, 2.0]), np.zeros((3, 1)))
        self.assertEqual(ctx.exception.particle, 1)

    def test_params_do_not_affect_equality(self):
        a = bank.monotone_ode()
        self.assertEqual(a, dataclasses.replace(a, params={'other': 1}))


class TestBank(unittest.TestCase):
    """Test lookup and listing of built-in problems."""

    def test_get_problem(self):
        problem = bank.get_problem('ou_additive', beta=0.3)
        self.assertEqual(problem.name, 'ou_additive')
        self.assertEqual(problem.params['beta'], 0.3)

    def test_unknown_problem_and_params(self):
        self.assertRaises(ConfigurationError, bank.get_problem, 'nope')
        self.assertRaises(ConfigurationError, bank.get_problem, 'zero', wrong=1)
        self.assertRaises(ConfigurationError, bank.get_diffusion, 'levy')

    def test_list_bank(self):
        entries = bank.list_bank()
        names = [e['name'] for e in entries]
        self.assertEqual(names, sorted(bank.PROBLEMS))
        by_name = {e['name']: e for e in entries}
        self.assertTrue(by_name['ou_additive']['has_oracle'])
        self.assertFalse(by_name['ou_diffusion']['has_oracle'])
        self.assertIsNone(by_name['monotone_ode']['horizon'])
        self.assertEqual(by_name['heat_bump']['horizon'], 1.0)

    def test_every_problem_builds_in_two_dimensions(self):
        for name in bank.PROBLEMS:
            problem = bank.get_problem(name, dimension=2)
            self.assertEqual(problem.dimension, 2)

    def test_linear_g_constants(self):
        problem = bank.linear_g(alpha=0.3, gamma=0.5)
        self.assertEqual(problem.alpha, (0.3,))
        self.assertEqual(problem.C_j, (0.5,))


class TestOracles(unittest.TestCase):
    """Test the closed-form references."""

    def test_ode_oracle(self):
        self.assertEqual(bank.ode_oracle(1.0, 1.0), 0.0)
        self.assertAlmostEqual(bank.ode_oracle(0.0, 50.0, mu=2.0, c=3.0), 1.5)
        self.assertAlmostEqual(bank.ode_oracle(0.0, 1.0), 1.0 - math.exp(-1.0))

    def test_ou_moments(self):
        self.assertEqual(bank.ou_stationary_moments(1.0, 1.0, 0.5), (1.0, 0.125))
        self.assertEqual(bank.ou_stationary_moments(2.0, 1.0, 1.0), (0.5, 0.25))

    def test_heat_bump_terminal_value(self):
        x = np.array([[0.0], [1.0], [-2.0]])
        np.testing.assert_allclose(bank.heat_bump_oracle(1.0, x, 1.0), np.exp(-x[:, 0] ** 2))

    def test_heat_bump_solves_backward_heat_equation(self):
        """d_t u + 1/2 u_xx - mu u = 0 by central differences."""
        t, x0, h, mu = 0.3, 0.7, 1e-3, 1.0
        u = lambda s, x: float(bank.heat_bump_oracle(s, np.array([[x]]), 1.0, mu)[0])
        u_t = (u(t + h, x0) - u(t - h, x0)) / (2.0 * h)
        u_xx = (u(t, x0 + h) - 2.0 * u(t, x0) + u(t, x0 - h)) / h ** 2
        self.assertAlmostEqual(u_t + 0.5 * u_xx - mu * u(t, x0), 0.0, delta=1e-5)

    def test_gaussian_abs_moment(self):
        self.assertAlmostEqual(bank.gaussian_abs_moment(0.0, 1.0, 2.0), 1.0, places=8)
        self.assertAlmostEqual(bank.gaussian_abs_moment(0.0, 1.0, 1.0), math.sqrt(2.0 / math.pi), places=8)
        self.assertEqual(bank.gaussian_abs_moment(-2.0, 0.0, 3.0), 8.0)


if __name__ == '__main__':
    unittest.main()
