# -*- coding: utf-8 -*-
"""Test refinement, contraction, repetition and moment studies."""

import math
import unittest

import numpy as np

from bdsde import bank, spde, studies
from bdsde.exceptions import ValidationError
from bdsde.infinite import LadderSettings
from bdsde.regression import BasisSpec
from bdsde.weighted_space import WeightedSpace, sample_reference_cloud

CONSTANT = BasisSpec('polynomial', 0)


class TestLevels(unittest.TestCase):

    def test_refinement_levels(self):
        levels = studies.refinement_levels(0.1, 512, 3)
        self.assertEqual([(level.dt, level.particles) for level in levels],
                         [(0.1, 512), (0.05, 2048), (0.025, 8192)])
        self.assertEqual(studies.refinement_levels(0.05, 1000, 2, growth=2)[1].particles, 2000)
        self.assertRaises(ValidationError, studies.refinement_levels, 0.1, 10, 0)
        self.assertRaises(ValidationError, studies.refinement_levels, 0.1, 10, 2, growth=0)


class TestWeakResidualStudy(unittest.TestCase):
    """The solver's weak residual and gradient discrepancy shrink under refinement of the heat flow."""

    @classmethod
    def setUpClass(cls):
        space = WeightedSpace(1, 5.0, 2.5)
        family = spde.bump_family(1, centers=(-1.5, -0.75, 0.0, 0.75, 1.5))
        cls.study = studies.weak_residual_study(bank.heat_bump(mu=0.0), space, studies.refinement_levels(0.1, 512, 3),
                                                BasisSpec('hypercube', 3, 32, 4.0), seeds=range(10), family=family)

    def test_residual_falls_on_every_level(self):
        factors = self.study.factors
        self.assertEqual(len(factors), 2)
        for factor in factors:
            self.assertGreaterEqual(factor, 1.4, factors)

    def test_gradient_discrepancy_falls(self):
        self.assertTrue(self.study.gradient_decreasing, self.study.gradient_factors)

    def test_report(self):
        out = self.study.to_dict()
        self.assertEqual([level['particles'] for level in out['levels']], [512, 2048, 8192])
        level = self.study.levels[0]
        self.assertEqual(len(level.gaps), 10)
        self.assertTrue(all(len(v) == 10 for v in level.gaps.values()))
        self.assertAlmostEqual(out['levels'][0]['rms_residual'], level.rms)

    def test_needs_finite_horizon(self):
        self.assertRaises(ValidationError, studies.weak_residual_study, bank.ou_additive(), WeightedSpace(1, 5.0, 2.5),
                          studies.refinement_levels(0.1, 16, 2), CONSTANT)


class TestContractionStudy(unittest.TestCase):

    def test_ratios_stay_below_bound(self):
        space = WeightedSpace(1, 5.0, 2.5)
        levels = studies.refinement_levels(0.05, 1000, 2, growth=2)
        study = studies.contraction_study(bank.linear_g(alpha=0.3), space, levels)
        self.assertEqual(len(study.levels), 2)
        for level in study.levels:
            self.assertEqual(len(level.ratios), 7)
            self.assertLessEqual(level.max_ratio, 0.75)
        self.assertEqual(len(study.to_dict()['levels']), 2)

    def test_tightening(self):
        study = studies.ContractionStudy((studies.ContractionLevel(0.1, 10, (1.0, 0.7, 0.6)),
                                          studies.ContractionLevel(0.05, 20, (1.0, 0.65, 0.6))))
        self.assertEqual(study.max_ratios, (0.7, 0.65))
        self.assertTrue(study.tightening)


class TestShiftRepetitions(unittest.TestCase):
    """Twenty independent KS tests of the shifted stationary field."""

    def test_most_repetitions_pass(self):
        problem = bank.ou_additive(mu=1.0, c=1.0, beta=0.5)
        space = WeightedSpace(1, 5.0, 2.5)
        cloud = sample_reference_cloud(5, space, 0)
        settings = LadderSettings(K=0.5, n_max=3, first_rung=3, basis=CONSTANT)
        study = studies.shift_ks_repetitions(problem, cloud, space, settings, 2.0, 0.0, 0.5, 5, 20, 0, 0.05, 6.0)
        self.assertEqual(study.repetitions, 20)
        self.assertGreaterEqual(study.passes, 18)
        self.assertEqual(study.to_dict()['passes'], study.passes)

    def test_bad_arguments(self):
        space = WeightedSpace(1, 5.0, 2.5)
        cloud = sample_reference_cloud(5, space, 0)
        settings = LadderSettings(K=0.5, n_max=3, first_rung=3, basis=CONSTANT)
        self.assertRaises(ValidationError, studies.shift_ks_repetitions, bank.ou_additive(), cloud, space, settings,
                          2.0, 0.0, 0.5, 5, 0, 0, 0.05, 6.0)


class TestReplicaMoments(unittest.TestCase):

    def test_x_independent_field_ignores_particle_count(self):
        problem = bank.ou_additive(mu=1.0, c=1.0, beta=0.5)
        space = WeightedSpace(1, 5.0, 2.5)
        settings = LadderSettings(K=0.5, n_max=3, first_rung=3, basis=CONSTANT)
        study = studies.replica_moments(problem, space, settings, 5, 4, 0, 0.1, 2.5, 0.5, doubled_replicas=2)
        self.assertEqual(len(study.values), 4)
        self.assertEqual(len(study.doubled), 2)
        self.assertTrue(all(math.isfinite(v) for v in study.values))
        self.assertAlmostEqual(study.doubling_ratio, 1.0, delta=1e-9)
        self.assertGreater(study.standard_error, 0.0)
        self.assertRaises(ValidationError, studies.replica_moments, problem, space, settings, 5, 1, 0, 0.1, 2.5, 0.5)

    def test_oracle(self):
        space = WeightedSpace(1, 5.0, 2.5)
        expected = space.normalizer * bank.gaussian_abs_moment(1.0, 0.125, 2.5)
        self.assertAlmostEqual(studies.ou_moment_oracle(bank.ou_additive(), space, 2.5), expected)
        self.assertGreater(expected, 0.0)
        np.testing.assert_allclose(bank.ou_stationary_moments(1.0, 1.0, 0.5), (1.0, 0.125))


if __name__ == '__main__':
    unittest.main()
