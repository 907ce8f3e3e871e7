# -*- coding: utf-8 -*-
"""Test field extraction, test functions, the weak form and the gradient representation."""

import math
import unittest

import numpy as np

from bdsde import bank, noise, spde
from bdsde.exceptions import UsageError
from bdsde.finite import BackwardSolution, picard_solve
from bdsde.forward import ParticleEnsemble, euler_maruyama
from bdsde.regression import BasisSpec
from bdsde.weighted_space import WeightedSpace, grid_reference_cloud, sample_reference_cloud

FINE = BasisSpec('hypercube', degree=3, cells=128, box=4.0)


def _oracle_solution(cloud, dt=0.02, T=1.0, mu=1.0):
    """A BackwardSolution holding the exact heat-bump field on a frozen grid."""
    x = np.asarray(cloud.particles)
    n = noise.grid_index(T, dt)
    M = x.shape[0]
    paths = np.repeat(x[None], n + 1, axis=0)
    ensemble = ParticleEnsemble(0, dt, x.copy(), paths, np.zeros((n, M, 1)), np.asarray(cloud.weights).copy())
    Y = np.empty((n + 1, M))
    Z = np.empty((n + 1, M, 1))
    for k in range(n + 1):
        t = k * dt
        u = bank.heat_bump_oracle(t, x, T, mu)
        Y[k] = u
        Z[k, :, 0] = -2.0 * x[:, 0] / (1.0 + 2.0 * (T - t)) * u
    return BackwardSolution(ensemble, Y, Z, [None] * (n + 1), np.zeros((n, 1)), FINE)


class TestTestFunctions(unittest.TestCase):
    """Test the smooth bumps."""

    def test_values_and_support(self):
        phi = spde.TestFunction((0.5,), 2.0)
        self.assertAlmostEqual(float(phi(np.array([[0.5]]))[0]), math.exp(-1.0))
        self.assertEqual(float(phi(np.array([[2.6]]))[0]), 0.0)
        self.assertEqual(phi.support_probe(), 0.0)

    def test_gradient_matches_differences(self):
        phi = spde.TestFunction((0.0, 1.0), 1.5)
        x = np.random.default_rng(0).uniform(-1.0, 1.0, (20, 2)) + np.array([0.0, 1.0])
        h = 1e-6
        for i in range(2):
            step = np.zeros(2)
            step[i] = h
            fd = (phi(x + step) - phi(x - step)) / (2.0 * h)
            np.testing.assert_allclose(phi.gradient(x)[:, i], fd, atol=1e-6)

    def test_bump_family(self):
        family = spde.bump_family(2)
        self.assertEqual(len(family), 6)
        self.assertEqual(family[0].name, 'bump(c=-1,w=0.5)')
        self.assertEqual(family[-1].center, (1.0, 0.0))


class TestFieldExtraction(unittest.TestCase):

    def setUp(self):
        problem = bank.monotone_ode(horizon=1.0)
        space = WeightedSpace(1, 5.0, 2.5)
        cloud = sample_reference_cloud(30, space, 0)
        driver, path = noise.sample_paths(problem.noise, 0.1, 1.0, 0, 30)
        ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, 10)
        self.solution, _ = picard_solve(problem, ensemble, path.increments(0.0, 1.0), space=space)

    def test_extract_at_start(self):
        snapshot = spde.extract_field(self.solution, 0.0)
        np.testing.assert_array_equal(snapshot.u, self.solution.Y[0])
        np.testing.assert_array_equal(snapshot.particles, self.solution.ensemble.starts)

    def test_extract_elsewhere(self):
        self.assertRaises(UsageError, spde.extract_field, self.solution, 0.5)


class TestWeakForm(unittest.TestCase):
    """The weak form on the exact heat-bump field, integrated on a fine grid."""

    def setUp(self):
        self.space = WeightedSpace(1, 5.0, 2.5)
        self.cloud = grid_reference_cloud(800, self.space)
        self.solution = _oracle_solution(self.cloud)

    def test_exact_field_satisfies_weak_form(self):
        problem = bank.heat_bump(mu=1.0)
        for phi in spde.bump_family(1):
            self.assertLess(spde.weak_residual(self.solution, problem, phi, self.space), 1e-2, phi.name)

    def test_wrong_reaction_is_detected(self):
        problem = bank.heat_bump(mu=0.0)
        phi = spde.TestFunction((0.0,), 1.0)
        self.assertGreater(spde.weak_residual(self.solution, problem, phi, self.space), 0.1)

    def test_terms(self):
        terms = spde.weak_residual_terms(self.solution, bank.heat_bump(mu=1.0), spde.TestFunction((0.0,), 1.0),
                                         self.space)
        self.assertEqual(set(terms), {'u', 'grad', 'div', 'f', 'g', 'scale'})
        self.assertAlmostEqual(terms['div'], 0.0)
        self.assertEqual(terms['g'], 0.0)

    def test_shared_history(self):
        problem = bank.heat_bump(mu=1.0)
        history = spde.field_history(self.solution, problem)
        self.assertEqual(history.u.shape, (self.solution.n_steps + 1, self.cloud.size))
        phi = spde.TestFunction((0.5,), 1.0)
        self.assertAlmostEqual(spde.weak_residual(self.solution, problem, phi, self.space, history),
                               spde.weak_residual(self.solution, problem, phi, self.space), places=12)
        gap, normalizer = spde.residual_of(spde.weak_residual_terms(self.solution, problem, phi, self.space))
        self.assertGreater(normalizer, 0.05)
        self.assertLess(gap, 1e-2 * normalizer)

    def test_zero_problem_residual(self):
        problem = bank.zero(horizon=1.0)
        space = WeightedSpace(1, 5.0, 2.5)
        cloud = sample_reference_cloud(50, space, 0)
        driver, path = noise.sample_paths(problem.noise, 0.1, 1.0, 0, 50)
        ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, 10)
        solution, _ = picard_solve(problem, ensemble, path.increments(0.0, 1.0), space=space)
        self.assertEqual(spde.weak_residual(solution, problem, spde.TestFunction((0.0,), 1.0), space), 0.0)


class TestGradientRepresentation(unittest.TestCase):
    """Z against sigma* grad u."""

    def test_exact_field(self):
        space = WeightedSpace(1, 5.0, 2.5)
        solution = _oracle_solution(grid_reference_cloud(800, space))
        gap = spde.gradient_representation_check(solution, bank.brownian_diffusion(), space)
        self.assertLess(gap, 1e-2)

    def test_linear_terminal(self):
        problem = bank.linear_terminal(slope=2.0)
        space = WeightedSpace(1, 5.0, 2.5)
        cloud = sample_reference_cloud(10000, space, 0)
        driver, path = noise.sample_paths(problem.noise, 0.02, 1.0, 0, cloud.size)
        ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, 50)
        solution, _ = picard_solve(problem, ensemble, path.increments(0.0, 1.0), basis=BasisSpec('polynomial', 1),
                                   space=space)
        gap = spde.gradient_representation_check(solution, problem.diffusion, space)
        self.assertLess(gap, 0.05 * 2.0 * math.sqrt(space.normalizer))


if __name__ == '__main__':
    unittest.main()
