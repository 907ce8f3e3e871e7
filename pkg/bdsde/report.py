"""Machine-readable run reports: report.json plus CSV tables."""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy

from bdsde import __version__
from bdsde.utils.encoding import write_text
from bdsde.utils.enum import EnumValue

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17e'


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    value: object = None
    tolerance: object = None
    detail: str = ""

    def to_dict(self):
        return {'name': self.name, 'passed': bool(self.passed), 'value': self.value,
                'tolerance': self.tolerance, 'detail': self.detail}


@dataclass
class Table:
    name: str
    header: tuple
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("table {} has {} columns, got {}".format(self.name, len(self.header), len(row)))
        self.rows.append(row)


class RunReport(object):
    """Sections of diagnostics, assertions and tables accumulated during a run."""

    def __init__(self, config):
        self.config = config
        self.sections = {}
        self.assertions = []
        self.tables = {}
        self.error = None

    def section(self, name, payload):
        self.sections[name] = payload

    def check(self, name, passed, value=None, tolerance=None, detail=""):
        assertion = Assertion(name, bool(passed), value, tolerance, detail)
        self.assertions.append(assertion)
        if not assertion.passed:
            logger.warning("assertion %s failed: value=%r tolerance=%r %s", name, value, tolerance, detail)
        return assertion

    def table(self, name, header):
        self.tables[name] = Table(name, tuple(header))
        return self.tables[name]

    @property
    def passed(self):
        return self.error is None and all(a.passed for a in self.assertions)

    def failures(self):
        return [a.name for a in self.assertions if not a.passed]

    def to_dict(self):
        return {
            'config': self.config.to_dict(),
            'versions': {'bdsde': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__},
            'seed': self.config.monte_carlo.seed,
            'sections': self.sections,
            'assertions': [a.to_dict() for a in self.assertions],
            'passed': self.passed,
            'error': self.error,
        }

    def write(self, directory=None):
        directory = directory or self.config.output.directory
        if not os.path.isdir(directory):
            os.makedirs(directory)
        formats = self.config.output.formats
        paths = []
        if 'json' in formats:
            paths.append(write_json(os.path.join(directory, 'report.json'), self.to_dict()))
        if 'csv' in formats:
            for table in self.tables.values():
                paths.append(write_csv(os.path.join(directory, table.name + '.csv'), table.header, table.rows))
        logger.info("wrote %d report files to %s", len(paths), directory)
        return paths


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, EnumValue):
        return value.name.lower()
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no representation for inf or nan.
        return value if math.isfinite(value) else repr(value)
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    return value


def write_json(path, payload):
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False)
    write_text(path, text + '\n')
    return path


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return value


def write_csv(path, header, rows):
    """RFC-4180 CSV with full-precision scientific notation for floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\r\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    write_text(path, buf.getvalue())
    return path
