# -*- coding: utf-8 -*-
"""Test least-squares regression bases."""

import unittest

import numpy as np

from bdsde import regression
from bdsde.exceptions import ValidationError
from bdsde.regression import BasisKind, BasisSpec


class TestBases(unittest.TestCase):
    """Test fits and gradients of both basis families."""

    def setUp(self):
        self.x = np.random.default_rng(0).uniform(-2.0, 2.0, (400, 1))

    def test_exponents(self):
        self.assertEqual(regression.exponents(1, 3), [(0,), (1,), (2,), (3,)])
        self.assertEqual(regression.exponents(2, 2), [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])

    def test_polynomial_reproduces_cubic(self):
        y = 1.0 - 2.0 * self.x[:, 0] + 0.5 * self.x[:, 0] ** 3
        fit = regression.fit(self.x, y, BasisSpec(BasisKind.POLYNOMIAL, 3))
        np.testing.assert_allclose(fit.predict(self.x), y, atol=1e-9)
        self.assertFalse(fit.reduced)

    def test_polynomial_gradient(self):
        fit = regression.fit(self.x, self.x[:, 0] ** 2, BasisSpec('polynomial', 2))
        probe = np.array([[-1.0], [0.0], [1.5]])
        np.testing.assert_allclose(fit.gradient(probe)[:, 0], [-2.0, 0.0, 3.0], atol=1e-9)

    def test_two_dimensional_gradient(self):
        x = np.random.default_rng(1).standard_normal((300, 2))
        y = x[:, 0] * x[:, 1] + x[:, 1]
        fit = regression.fit(x, y, BasisSpec('polynomial', 2))
        grad = fit.gradient(x[:5])
        np.testing.assert_allclose(grad[:, 0], x[:5, 1], atol=1e-9)
        np.testing.assert_allclose(grad[:, 1], x[:5, 0] + 1.0, atol=1e-9)

    def test_hypercube_piecewise_linear(self):
        """|x| is linear on every cell when a cell edge sits at the origin."""
        spec = BasisSpec('hypercube', degree=1, cells=4, box=2.0)
        fit = regression.fit(self.x, np.abs(self.x[:, 0]), spec)
        np.testing.assert_allclose(fit.predict(self.x), np.abs(self.x[:, 0]), atol=1e-9)
        np.testing.assert_allclose(fit.gradient(np.array([[-0.5], [1.5]]))[:, 0], [-1.0, 1.0], atol=1e-9)

    def test_hypercube_outside_box(self):
        """Points beyond the box use the nearest edge cell."""
        spec = BasisSpec('hypercube', degree=1, cells=2, box=1.0)
        x = np.random.default_rng(2).uniform(-1.0, 1.0, (200, 1))
        fit = regression.fit(x, 3.0 * x[:, 0], spec)
        self.assertAlmostEqual(float(fit.predict(np.array([[1.5]]))[0]), 4.5)

    def test_hypercube_cells_reduce_alone(self):
        """A sparse cell falls back to a lower degree without touching its neighbours."""
        left = np.random.default_rng(3).uniform(-1.0, 0.0, (100, 1))
        x = np.vstack([left, [[0.25], [0.75]]])
        fit = regression.fit(x, x[:, 0] ** 2, BasisSpec('hypercube', degree=2, cells=2, box=1.0))
        self.assertTrue(fit.reduced)
        self.assertEqual(fit.degree, 1)
        np.testing.assert_allclose(fit.predict(left), left[:, 0] ** 2, atol=1e-9)
        np.testing.assert_allclose(fit.predict(np.array([[0.5]])), [0.3125], atol=1e-9)
        np.testing.assert_allclose(fit.gradient(np.array([[-0.5], [0.5]]))[:, 0], [-1.0, 1.0], atol=1e-9)

    def test_hypercube_empty_cell_predicts_zero(self):
        x = np.random.default_rng(4).uniform(-1.0, 0.0, (50, 1))
        fit = regression.fit(x, np.ones(50), BasisSpec('hypercube', degree=1, cells=2, box=1.0))
        np.testing.assert_allclose(fit.predict(np.array([[-0.5], [0.5]])), [1.0, 0.0], atol=1e-9)

    def test_vector_targets(self):
        targets = np.column_stack([self.x[:, 0], 2.0 * self.x[:, 0]])
        fit = regression.fit(self.x, targets, BasisSpec('polynomial', 1))
        np.testing.assert_allclose(fit.predict(self.x), targets, atol=1e-9)

    def test_rank_deficient_design(self):
        x = np.ones((50, 1))
        fit = regression.fit(x, np.full(50, 4.0), BasisSpec('polynomial', 3))
        self.assertTrue(fit.reduced)
        self.assertEqual(fit.degree, 0)
        np.testing.assert_allclose(fit.predict(x), 4.0)

    def test_bad_arguments(self):
        self.assertRaises(ValidationError, regression.fit, self.x, np.ones(3), BasisSpec())
        self.assertRaises(ValidationError, BasisSpec, 'polynomial', -1)
        self.assertRaises(ValueError, BasisSpec, 'splines')
        self.assertEqual(BasisSpec('hypercube', 2, 4, 3.0).to_dict(),
                         {'kind': 'hypercube', 'degree': 2, 'cells': 4, 'box': 3.0})


if __name__ == '__main__':
    unittest.main()
