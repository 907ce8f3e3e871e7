# -*- coding: utf-8 -*-
"""Test experiment configuration loading and validation."""

import os
import shutil
import tempfile
import unittest

from bdsde.config import (ExperimentConfig, GridConfig, Pipeline, StudyConfig, dump_config, load_config)
from bdsde.exceptions import ConfigurationError
from bdsde.regression import BasisKind
from bdsde.utils.encoding import read_text, safe_decode, safe_encode, write_text

CONFIGS = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, os.pardir, 'configs')

EXAMPLE = u"""
pipeline: stationarity
problem:
  name: ou_additive
  params: {beta: 0.3}
grid:
  dt: 0.05
  Tprime: 3.0
  times: [0.0, 1.0]
solver:
  basis: hypercube
  degree: 1
monte_carlo:
  replicas: 8
output:
  formats: [json]
"""


class TestExperimentConfig(unittest.TestCase):
    """Test defaults, round trips and rejection of bad trees."""

    def test_defaults(self):
        config = ExperimentConfig.from_dict(None)
        self.assertEqual(config, ExperimentConfig())
        self.assertIs(config.pipeline, Pipeline.FULL)
        self.assertEqual(config.problem.name, 'zero')
        self.assertEqual(config.space.p, 2.5)
        self.assertEqual(config.solver.basis_spec().kind, BasisKind.POLYNOMIAL)

    def test_round_trip(self):
        config = ExperimentConfig.from_dict({'pipeline': 'infinite', 'problem': {'name': 'monotone_ode',
                                                                                 'params': {'c': 2.0}},
                                             'grid': {'times': [0.0, 0.5]}, 'noise': {'eigenvalues': [1.0, 0.5]}})
        again = ExperimentConfig.from_dict(config.to_dict())
        self.assertEqual(again, config)
        self.assertEqual(again.grid.times, (0.0, 0.5))
        self.assertEqual(again.noise.eigenvalues, (1.0, 0.5))
        self.assertEqual(config.to_dict()['pipeline'], 'infinite')

    def test_pipeline_spellings(self):
        self.assertIs(ExperimentConfig(pipeline='Finite').pipeline, Pipeline.FINITE)
        self.assertIs(ExperimentConfig(pipeline=Pipeline.INFINITE).pipeline, Pipeline.INFINITE)
        self.assertRaises(ConfigurationError, ExperimentConfig, pipeline='sideways')

    def test_unknown_keys(self):
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'extra': 1})
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'grid': {'step': 0.1}})
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'grid': [0.1]})

    def test_section_validation(self):
        self.assertRaises(ConfigurationError, GridConfig, dt=0.0)
        self.assertRaises(ConfigurationError, GridConfig, times=(0.0, 6.0))
        self.assertRaises(ConfigurationError, GridConfig, times=(4.5,), shift=1.0)
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'solver': {'basis': 'splines'}})
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'solver': {'K': -1.0}})
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'monte_carlo': {'particles': 0}})
        self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'output': {'formats': ['xml']}})

    def test_overrides(self):
        config = ExperimentConfig().with_overrides(seed=7, out='elsewhere')
        self.assertEqual(config.monte_carlo.seed, 7)
        self.assertEqual(config.output.directory, 'elsewhere')
        self.assertEqual(ExperimentConfig().with_overrides(), ExperimentConfig())

    def test_study_section(self):
        config = ExperimentConfig.from_dict({'study': {'refinement_levels': 3, 'refinement_seeds': 10,
                                                       'repetitions': 20, 'moment_replicas': 150}})
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)
        self.assertEqual(config.study.repetition_replicas, 5)
        self.assertEqual(ExperimentConfig().study, StudyConfig())
        for bad in ({'refinement_levels': 1}, {'refinement_seeds': 0}, {'particle_growth': 0},
                    {'grid_half_width': 0.0}, {'repetitions': -1}, {'repetition_replicas': 1},
                    {'ks_pass_fraction': 0.0}, {'moment_replicas': -2}):
            self.assertRaises(ConfigurationError, ExperimentConfig.from_dict, {'study': bad})


class TestConfigFiles(unittest.TestCase):
    """Test YAML files on disk."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def _write(self, text, name='config.yaml'):
        path = os.path.join(self.tmp, name)
        write_text(path, text)
        return path

    def test_load(self):
        config = load_config(self._write(EXAMPLE))
        self.assertIs(config.pipeline, Pipeline.STATIONARITY)
        self.assertEqual(config.problem.params, {'beta': 0.3})
        self.assertEqual(config.grid.times, (0.0, 1.0))
        self.assertEqual(config.solver.basis_spec().kind, BasisKind.HYPERCUBE)
        self.assertEqual(config.output.formats, ('json',))

    def test_dump_and_reload(self):
        config = load_config(self._write(EXAMPLE))
        again = load_config(self._write(dump_config(config), 'again.yaml'))
        self.assertEqual(again, config)

    def test_byte_order_mark(self):
        path = os.path.join(self.tmp, 'bom.yaml')
        with open(path, 'wb') as f:
            f.write(b'\xef\xbb\xbfpipeline: finite\n')
        self.assertIs(load_config(path).pipeline, Pipeline.FINITE)

    def test_empty_file(self):
        self.assertEqual(load_config(self._write(u'')), ExperimentConfig())

    def test_bad_files(self):
        self.assertRaises(ConfigurationError, load_config, os.path.join(self.tmp, 'missing.yaml'))
        self.assertRaises(ConfigurationError, load_config, self._write(u'grid: [unclosed'))
        self.assertRaises(ConfigurationError, load_config, self._write(u'- a\n- b\n'))


class TestEncoding(unittest.TestCase):

    def test_safe_decode_and_encode(self):
        self.assertEqual(safe_decode(b'r\xc3\xa9seau'), u'réseau')
        self.assertEqual(safe_decode(3), u'3')
        self.assertEqual(safe_encode(u'réseau'), b'r\xc3\xa9seau')

    def test_text_files(self):
        path = os.path.join(tempfile.mkdtemp(), 'note.txt')
        try:
            write_text(path, u'ρ-weighted')
            self.assertEqual(read_text(path), u'ρ-weighted')
        finally:
            shutil.rmtree(os.path.dirname(path))


class TestShippedConfigs(unittest.TestCase):
    """The acceptance configs under configs/ load and select their studies."""

    def _load(self, name):
        return load_config(os.path.join(CONFIGS, name))

    def test_stationarity_acceptance(self):
        config = self._load('ou_stationarity_acceptance.yaml')
        self.assertIs(config.pipeline, Pipeline.STATIONARITY)
        self.assertEqual(config.monte_carlo.replicas, 500)
        self.assertEqual(config.grid.times, (0.0, 1.0, 2.0))
        self.assertEqual(config.study.repetitions, 20)

    def test_refinement_studies(self):
        heat = self._load('heat_refinement.yaml')
        self.assertEqual((heat.study.refinement_levels, heat.study.refinement_seeds), (3, 10))
        self.assertEqual(heat.solver.basis_spec().kind, BasisKind.HYPERCUBE)
        self.assertEqual(self._load('linear_g_contraction.yaml').study.refinement_levels, 3)
        self.assertEqual(self._load('ou_moment.yaml').study.moment_replicas, 150)


if __name__ == '__main__':
    unittest.main()
