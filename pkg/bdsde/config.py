"""Experiment configuration: a YAML tree read into frozen dataclasses.

Every section has defaults, so an empty file is a valid config. Keys that no
section declares are rejected, and ``from_dict(cfg.to_dict()) == cfg``.
"""

import dataclasses
import logging
from dataclasses import dataclass, field

import yaml

from bdsde.exceptions import ConfigurationError
from bdsde.regression import BasisKind, BasisSpec
from bdsde.utils.encoding import read_text
from bdsde.utils.enum import Enum, EnumValue

logger = logging.getLogger(__name__)


class Pipeline(Enum):
    FINITE = EnumValue(0, description="finite-horizon solve, weak residuals and gradient check")
    INFINITE = EnumValue(1, description="horizon ladder and p-th moment diagnostic")
    STATIONARITY = EnumValue(2, description="stationary replicas, shift and anchor checks")
    FULL = EnumValue(3, description="all of the above")


OUTPUT_FORMATS = ('json', 'csv')


def _require(ok, message, *args):
    if not ok:
        raise ConfigurationError(message.format(*args))


@dataclass(frozen=True)
class ProblemConfig:
    name: str = 'zero'
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        _require(isinstance(self.params, dict), "problem.params must be a mapping")


@dataclass(frozen=True)
class SpaceConfig:
    dimension: int = 1
    q: float = 5.0
    p: float = 2.5


@dataclass(frozen=True)
class NoiseConfig:
    eigenvalues: tuple = None
    span: float = None

    def __post_init__(self):
        _require(self.span is None or self.span > 0, "noise.span must be positive")


@dataclass(frozen=True)
class GridConfig:
    dt: float = 0.01
    horizon: float = 1.0
    n_max: int = 10
    Tprime: float = 5.0
    Tprime_alt: float = 8.0
    times: tuple = (0.0, 1.0, 2.0)
    shift: float = 1.0

    def __post_init__(self):
        _require(self.dt > 0, "grid.dt must be positive, got {}", self.dt)
        _require(self.horizon > 0, "grid.horizon must be positive, got {}", self.horizon)
        _require(self.n_max >= 1, "grid.n_max must be >= 1, got {}", self.n_max)
        _require(len(self.times) >= 1, "grid.times must not be empty")
        _require(all(0.0 <= t <= self.Tprime for t in self.times),
                 "grid.times must lie in [0, Tprime={}], got {}", self.Tprime, self.times)
        _require(self.shift >= 0, "grid.shift must be >= 0")
        _require(max(self.times) + self.shift <= self.Tprime,
                 "grid.times shifted by {} exceed Tprime={}", self.shift, self.Tprime)


@dataclass(frozen=True)
class SolverConfig:
    basis: str = 'polynomial'
    degree: int = 3
    cells: int = 8
    box: float = None
    picard_iters: int = 30
    picard_tol: float = 1e-10
    sweeps: int = 2
    cauchy_tol: float = 1e-3
    window: float = 1.0
    first_rung: int = 1
    K: float = None
    probes: int = 1000

    def __post_init__(self):
        try:
            BasisKind.from_string(self.basis)
        except ValueError as e:
            raise ConfigurationError(str(e))
        _require(self.degree >= 0, "solver.degree must be >= 0")
        _require(self.picard_iters >= 1, "solver.picard_iters must be >= 1")
        _require(self.cauchy_tol > 0, "solver.cauchy_tol must be positive")
        _require(self.K is None or self.K > 0, "solver.K must be positive")
        _require(self.probes >= 1, "solver.probes must be >= 1")

    def basis_spec(self):
        return BasisSpec(BasisKind.from_string(self.basis), self.degree, self.cells, self.box)


@dataclass(frozen=True)
class MonteCarloConfig:
    particles: int = 2000
    replicas: int = 20
    seed: int = 0
    workers: int = 1
    equivalence_paths: int = 4

    def __post_init__(self):
        _require(self.particles >= 1, "monte_carlo.particles must be >= 1")
        _require(self.replicas >= 1, "monte_carlo.replicas must be >= 1")
        _require(self.seed >= 0, "monte_carlo.seed must be >= 0")
        _require(self.workers >= 1, "monte_carlo.workers must be >= 1")


@dataclass(frozen=True)
class ToleranceConfig:
    mean_se: float = 3.0
    variance_rel: float = 0.10
    ks_level: float = 0.05
    Tprime_rel: float = 0.05
    gradient_rel: float = 0.05
    ode_dt_factor: float = 5.0
    fixed_point_rel: float = 0.1
    residual_factor: float = 1.4
    contraction_ratio: float = 0.75
    ladder_base_slack: float = 0.1
    moment_rel: float = 0.25


@dataclass(frozen=True)
class StudyConfig:
    """Refinement and repetition studies run after the main solve; zero levels or repetitions disable them."""
    refinement_levels: int = 0
    refinement_seeds: int = 4
    particle_growth: int = 4
    grid_half_width: float = 4.0
    repetitions: int = 0
    repetition_replicas: int = 5
    ks_pass_fraction: float = 0.9
    moment_replicas: int = 0

    def __post_init__(self):
        _require(self.refinement_levels == 0 or self.refinement_levels >= 2,
                 "study.refinement_levels must be 0 or >= 2")
        _require(self.refinement_seeds >= 1, "study.refinement_seeds must be >= 1")
        _require(self.particle_growth >= 1, "study.particle_growth must be >= 1")
        _require(self.grid_half_width > 0, "study.grid_half_width must be positive")
        _require(self.repetitions >= 0 and self.moment_replicas >= 0, "study counts must be >= 0")
        _require(self.repetition_replicas >= 2, "study.repetition_replicas must be >= 2")
        _require(0.0 < self.ks_pass_fraction <= 1.0, "study.ks_pass_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = 'bdsde-out'
    formats: tuple = OUTPUT_FORMATS

    def __post_init__(self):
        unknown = set(self.formats) - set(OUTPUT_FORMATS)
        _require(not unknown, "unknown output formats {}", sorted(unknown))


_SECTIONS = {
    'problem': ProblemConfig,
    'space': SpaceConfig,
    'noise': NoiseConfig,
    'grid': GridConfig,
    'solver': SolverConfig,
    'monte_carlo': MonteCarloConfig,
    'tolerances': ToleranceConfig,
    'study': StudyConfig,
    'output': OutputConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: EnumValue = Pipeline.FULL
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    space: SpaceConfig = field(default_factory=SpaceConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        try:
            pipeline = (Pipeline.from_id(self.pipeline) if isinstance(self.pipeline, EnumValue)
                        else Pipeline.from_string(self.pipeline))
        except ValueError as e:
            raise ConfigurationError(str(e))
        object.__setattr__(self, 'pipeline', pipeline)

    def to_dict(self):
        out = {'pipeline': self.pipeline.name.lower()}
        for name in _SECTIONS:
            out[name] = _plain(dataclasses.asdict(getattr(self, name)))
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - set(_SECTIONS) - {'pipeline'}
        _require(not unknown, "unknown config keys: {}", ", ".join(sorted(unknown)))
        kwargs = {}
        if 'pipeline' in data:
            kwargs['pipeline'] = data['pipeline']
        for name, section_cls in _SECTIONS.items():
            if name in data:
                kwargs[name] = _section(section_cls, name, data[name])
        return cls(**kwargs)

    def with_overrides(self, seed=None, out=None):
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, monte_carlo=dataclasses.replace(cfg.monte_carlo, seed=int(seed)))
        if out is not None:
            cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, directory=str(out)))
        return cfg


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _section(section_cls, name, values):
    if values is None:
        return section_cls()
    _require(isinstance(values, dict), "config section {!r} must be a mapping", name)
    fields = {f.name: f for f in dataclasses.fields(section_cls)}
    unknown = set(values) - set(fields)
    _require(not unknown, "unknown keys in section {!r}: {}", name, ", ".join(sorted(unknown)))
    kwargs = {}
    for key, value in values.items():
        if isinstance(value, list) and key != 'params':
            value = tuple(value)
        kwargs[key] = value
    try:
        return section_cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError("bad section {!r}: {}".format(name, e))


def load_config(path):
    """Parse a YAML experiment file into an ExperimentConfig."""
    try:
        text = read_text(path)
    except (IOError, OSError) as e:
        raise ConfigurationError("cannot read config {}: {}".format(path, e))
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError("invalid YAML in {}: {}".format(path, e))
    _require(data is None or isinstance(data, dict), "config root must be a mapping")
    config = ExperimentConfig.from_dict(data)
    logger.info("loaded %s pipeline config for problem %r from %s", config.pipeline, config.problem.name, path)
    return config


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False)
