"""Convergence and repetition studies: the solvers rerun over refinement levels or over fresh noise.

A refinement level halves dt and multiplies the particle count by a growth
factor. Every study returns a frozen record with a `to_dict` for the run
report; pass/fail thresholds are left to the caller.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from bdsde import bank, noise, spde
from bdsde.exceptions import ValidationError
from bdsde.finite import picard_solve
from bdsde.forward import euler_maruyama
from bdsde.infinite import pth_moment_diagnostic, solve_horizon_ladder
from bdsde.noise import grid_index
from bdsde.stationary import KS_LEVEL, build_replicas
from bdsde.weighted_space import grid_reference_cloud, sample_reference_cloud

logger = logging.getLogger(__name__)

# Picard iterations whose difference ratios are compared; the first ratio
# still carries the start from zero.
CONTRACTION_WINDOW = slice(1, 7)


@dataclass(frozen=True)
class Level:
    dt: float
    particles: int


def refinement_levels(dt, particles, n_levels, growth=4):
    """Level l runs with dt / 2**l and particles * growth**l."""
    if n_levels < 1:
        raise ValidationError("a refinement study needs at least one level")
    if growth < 1:
        raise ValidationError("particle growth must be >= 1")
    return tuple(Level(dt / 2 ** l, int(particles) * growth ** l) for l in range(n_levels))


def _factors(values):
    return tuple(a / b if b > 0.0 else math.inf for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class ResidualLevel:
    """Per test function, one |LHS - RHS| and one normalizer per seed."""
    dt: float
    particles: int
    gaps: dict
    normalizers: dict
    gradient: tuple

    def relative(self, name):
        gaps = np.asarray(self.gaps[name], dtype=float)
        normalizers = np.asarray(self.normalizers[name], dtype=float)
        return np.divide(gaps, normalizers, out=np.zeros_like(gaps), where=normalizers > 0.0)

    @property
    def rms(self):
        """Root mean square of the relative weak residuals over test functions and seeds."""
        values = np.concatenate([self.relative(name) for name in self.gaps])
        return float(np.sqrt(np.mean(values ** 2)))

    @property
    def gradient_discrepancy(self):
        return float(np.mean(self.gradient))


@dataclass(frozen=True)
class ResidualStudy:
    levels: tuple

    @property
    def factors(self):
        """Coarse-to-fine ratios of the rms weak residual."""
        return _factors([level.rms for level in self.levels])

    @property
    def gradient_factors(self):
        return _factors([level.gradient_discrepancy for level in self.levels])

    @property
    def gradient_decreasing(self):
        return all(f > 1.0 for f in self.gradient_factors)

    def to_dict(self):
        return {
            'levels': [{'dt': l.dt, 'particles': l.particles, 'rms_residual': l.rms,
                        'gradient_discrepancy': l.gradient_discrepancy} for l in self.levels],
            'factors': list(self.factors),
            'gradient_factors': list(self.gradient_factors),
        }


def weak_residual_study(problem, space, levels, basis, seeds=(0,), family=None, half_width=4.0, sweeps=2,
                        picard_iters=30, picard_tol=1e-10):
    """Weak residuals and the gradient discrepancy of the solver on every level.

    Each level solves on a grid cloud of `particles` midpoints of
    [-half_width, half_width]^d, once per seed, so the weak-form integrals are
    midpoint sums and the remaining error is the solver's own.
    """
    if problem.infinite:
        raise ValidationError("the weak-residual study needs a finite horizon")
    family = family or spde.bump_family(problem.dimension)
    T = problem.horizon
    out = []
    for level in levels:
        n_steps = grid_index(T, level.dt, "horizon")
        cloud = grid_reference_cloud(level.particles, space, half_width)
        gaps = {phi.name: [] for phi in family}
        normalizers = {phi.name: [] for phi in family}
        gradient = []
        for seed in seeds:
            driver, path = noise.sample_paths(problem.noise, level.dt, T, seed, cloud.size)
            ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, n_steps)
            solution, _ = picard_solve(problem, ensemble, path.increments(0.0, T), picard_iters, picard_tol, basis,
                                       sweeps, space=space, strict=False)
            history = spde.field_history(solution, problem)
            for phi in family:
                gap, normalizer = spde.residual_of(spde.weak_residual_terms(solution, problem, phi, space, history))
                gaps[phi.name].append(gap)
                normalizers[phi.name].append(normalizer)
            gradient.append(spde.gradient_representation_check(solution, problem.diffusion, space))
        record = ResidualLevel(level.dt, level.particles, {k: tuple(v) for k, v in gaps.items()},
                               {k: tuple(v) for k, v in normalizers.items()}, tuple(gradient))
        logger.info("refinement dt=%g M=%d: rms weak residual %.4e, gradient discrepancy %.4e",
                    level.dt, level.particles, record.rms, record.gradient_discrepancy)
        out.append(record)
    return ResidualStudy(tuple(out))


@dataclass(frozen=True)
class ContractionLevel:
    dt: float
    particles: int
    ratios: tuple

    @property
    def max_ratio(self):
        window = self.ratios[CONTRACTION_WINDOW]
        return max(window) if window else float('nan')


@dataclass(frozen=True)
class ContractionStudy:
    levels: tuple

    @property
    def max_ratios(self):
        return tuple(level.max_ratio for level in self.levels)

    @property
    def tightening(self):
        """True when the worst Picard ratio strictly falls from each level to the next."""
        r = self.max_ratios
        return all(b < a for a, b in zip(r, r[1:]))

    def to_dict(self):
        return {'levels': [{'dt': l.dt, 'particles': l.particles, 'ratios': list(l.ratios),
                            'max_ratio': l.max_ratio} for l in self.levels],
                'tightening': self.tightening}


def contraction_study(problem, space, levels, basis=None, seed=0, iterations=8, sweeps=2):
    """Difference ratios of `iterations` Picard steps with tol = 0 on every level."""
    if problem.infinite:
        raise ValidationError("the contraction study needs a finite horizon")
    T = problem.horizon
    out = []
    for level in levels:
        cloud = sample_reference_cloud(level.particles, space, seed)
        driver, path = noise.sample_paths(problem.noise, level.dt, T, seed, cloud.size)
        ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, grid_index(T, level.dt, "horizon"))
        _, diagnostics = picard_solve(problem, ensemble, path.increments(0.0, T), iterations, 0.0, basis, sweeps,
                                      space=space, strict=False)
        out.append(ContractionLevel(level.dt, level.particles, tuple(diagnostics.ratios)))
        logger.info("contraction dt=%g M=%d: max ratio %.4f", level.dt, level.particles, out[-1].max_ratio)
    return ContractionStudy(tuple(out))


@dataclass(frozen=True)
class RepetitionStudy:
    t: float
    r: float
    statistics: tuple
    pvalues: tuple
    level: float = KS_LEVEL

    @property
    def passes(self):
        """Repetitions in which the KS test does not reject equality in law."""
        return sum(1 for p in self.pvalues if p >= self.level)

    @property
    def repetitions(self):
        return len(self.pvalues)

    def to_dict(self):
        return {'t': self.t, 'r': self.r, 'level': self.level, 'repetitions': self.repetitions,
                'passes': self.passes, 'pvalues': list(self.pvalues), 'statistics': list(self.statistics)}


def shift_ks_repetitions(problem, cloud, space, settings, Tprime, t, r, replicas, repetitions, seed, dt, span,
                         workers=1, level=KS_LEVEL):
    """Independent two-sample KS tests of v_{t+r} against v_t o theta_r.

    Repetition j draws the v_{t+r} sample on `replicas` paths and the shifted
    v_t sample on the next `replicas` paths, so the two samples and all
    repetitions use disjoint noise. Each sample point is a replica's cloud mean.
    """
    if repetitions < 1:
        raise ValidationError("need at least one repetition")
    grid_index(r, dt, "shift offset")
    statistics, pvalues = [], []
    for j in range(repetitions):
        first = 2 * j * replicas
        later = build_replicas(problem, cloud, space, settings, Tprime, (t + r,), replicas, seed, dt, span,
                               workers=workers, first_path=first)
        moved = build_replicas(problem, cloud, space, settings, Tprime, (t,), replicas, seed, dt, span,
                               shift_by=r, workers=workers, first_path=first + replicas)
        result = stats.ks_2samp([run.cloud_mean(t + r) for run in later], [run.cloud_mean(t) for run in moved])
        statistics.append(float(result.statistic))
        pvalues.append(float(result.pvalue))
    study = RepetitionStudy(float(t), float(r), tuple(statistics), tuple(pvalues), level)
    logger.info("shift KS over %d repetitions: %d pass at level %g", repetitions, study.passes, level)
    return study


@dataclass(frozen=True)
class MomentStudy:
    particles: int
    values: tuple
    doubled: tuple

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def standard_error(self):
        n = len(self.values)
        return float(np.std(self.values, ddof=1) / math.sqrt(n)) if n > 1 else float('nan')

    @property
    def doubling_ratio(self):
        """Mean moment with 2M particles over the mean with M on the same replicas."""
        base = float(np.mean(self.values[:len(self.doubled)]))
        return float(np.mean(self.doubled)) / base if base > 0.0 else float('nan')

    def to_dict(self):
        return {'particles': self.particles, 'replicas': len(self.values), 'mean': self.mean,
                'standard_error': self.standard_error, 'doubling_ratio': self.doubling_ratio}


def _start_moment(problem, space, settings, particles, seed, dt, p, K, path_id):
    cloud = sample_reference_cloud(particles, space, seed)
    driver, path = noise.sample_paths(problem.noise, dt, settings.n_max, seed, particles, path_id=path_id)
    ensemble = euler_maruyama(0.0, cloud, problem.diffusion, driver, settings.n_max * grid_index(1.0, dt))
    solution, _ = solve_horizon_ladder(problem, ensemble, path, space, settings)
    return pth_moment_diagnostic(solution, p, K, ensemble, space, window=0.0)


def replica_moments(problem, space, settings, particles, replicas, seed, dt, p, K, doubled_replicas=None):
    """Z_rho sum_i w_i |Y_0^i|^p of the ladder field on `replicas` backward paths.

    The first `doubled_replicas` paths are solved again with twice the particles.
    """
    if replicas < 2:
        raise ValidationError("a moment study needs at least two replicas")
    doubled_replicas = replicas if doubled_replicas is None else min(doubled_replicas, replicas)
    values = tuple(_start_moment(problem, space, settings, particles, seed, dt, p, K, i) for i in range(replicas))
    doubled = tuple(_start_moment(problem, space, settings, 2 * particles, seed, dt, p, K, i)
                    for i in range(doubled_replicas))
    study = MomentStudy(int(particles), values, doubled)
    logger.info("p=%g moment over %d replicas: %.4e (doubling ratio %.3f)", p, replicas, study.mean,
                study.doubling_ratio)
    return study


def ou_moment_oracle(problem, space, p):
    """Z_rho E|V|^p for the stationary Gaussian law of the additive OU field."""
    params = problem.params
    mean, variance = bank.ou_stationary_moments(params['mu'], params['c'], params['beta'])
    return space.normalizer * bank.gaussian_abs_moment(mean, variance, p)
