# -*- coding: utf-8 -*-
"""Test report serialization."""

import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from bdsde import __version__
from bdsde.config import ExperimentConfig, Pipeline
from bdsde.regression import BasisSpec
from bdsde.report import RunReport, Table, to_jsonable, write_csv, write_json


class TestJsonable(unittest.TestCase):
    """Test conversion of numpy scalars, enums and non-finite floats."""

    def test_numpy_values(self):
        payload = to_jsonable({'a': np.float64(0.5), 'b': np.int32(3), 'c': np.array([[1.0, 2.0]]),
                               'd': np.bool_(True), 1: (np.float32(2.0),)})
        self.assertEqual(payload, {'a': 0.5, 'b': 3, 'c': [[1.0, 2.0]], 'd': True, '1': [2.0]})
        self.assertIs(type(payload['b']), int)

    def test_non_finite(self):
        self.assertEqual(to_jsonable([float('inf'), -np.inf, float('nan')]), ['inf', '-inf', 'nan'])

    def test_enum_and_objects(self):
        self.assertEqual(to_jsonable(Pipeline.STATIONARITY), 'stationarity')
        self.assertEqual(to_jsonable(BasisSpec('hypercube', 1)), {'kind': 'hypercube', 'degree': 1, 'cells': 8,
                                                                 'box': None})


class TestFiles(unittest.TestCase):
    """Test the JSON and CSV writers."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_write_json(self):
        path = write_json(os.path.join(self.tmp, 'x.json'), {'b': np.float64(1.5), 'a': float('inf')})
        with open(path) as f:
            text = f.read()
        self.assertTrue(text.endswith('\n'))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {'a': 'inf', 'b': 1.5})

    def test_write_csv(self):
        path = write_csv(os.path.join(self.tmp, 'x.csv'), ('rung', 'norm', 'label'),
                         [(np.int64(2), 0.1, 'a,b'), (3, np.float64(1.0), 'c')])
        with open(path, 'rb') as f:
            raw = f.read()
        self.assertEqual(raw.split(b'\r\n'), [
            b'rung,norm,label',
            b'2,1.00000000000000006e-01,"a,b"',
            b'3,1.00000000000000000e+00,c',
            b'',
        ])

    def test_table_width(self):
        table = Table('t', ('a', 'b'))
        table.add(1, 2)
        self.assertRaises(ValueError, table.add, 1)


class TestRunReport(unittest.TestCase):
    """Test assertion bookkeeping and the files a run leaves behind."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.config = ExperimentConfig().with_overrides(seed=11, out=self.tmp)

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_assertions(self):
        report = RunReport(self.config)
        self.assertTrue(report.passed)
        report.check('first', True, 0.1, 0.2)
        report.check('second', False, 0.3, 0.2, 'too far')
        self.assertFalse(report.passed)
        self.assertEqual(report.failures(), ['second'])

    def test_error_fails_report(self):
        report = RunReport(self.config)
        report.error = {'type': 'DivergenceError'}
        self.assertFalse(report.passed)

    def test_to_dict(self):
        report = RunReport(self.config)
        report.section('ladder', {'rungs': [2, 3]})
        payload = report.to_dict()
        self.assertEqual(payload['seed'], 11)
        self.assertEqual(payload['versions']['bdsde'], __version__)
        self.assertEqual(payload['config']['pipeline'], 'full')
        self.assertEqual(payload['sections'], {'ladder': {'rungs': [2, 3]}})

    def test_write(self):
        report = RunReport(self.config)
        report.check('ok', True)
        report.table('rungs', ('rung', 'norm')).add(2, 0.5)
        paths = report.write()
        self.assertEqual(sorted(os.path.basename(p) for p in paths), ['report.json', 'rungs.csv'])
        with open(os.path.join(self.tmp, 'report.json')) as f:
            payload = json.load(f)
        self.assertTrue(payload['passed'])
        self.assertEqual(payload['assertions'][0]['name'], 'ok')

    def test_write_creates_directory(self):
        report = RunReport(self.config)
        target = os.path.join(self.tmp, 'nested', 'out')
        report.write(target)
        self.assertTrue(os.path.exists(os.path.join(target, 'report.json')))


if __name__ == '__main__':
    unittest.main()
