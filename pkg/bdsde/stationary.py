"""Stationary solutions v_t = Y_{T'-t}^{T'-t, .} built by reversing a two-sided noise path at T'.

The field at time t solves the infinite-horizon equation started at T' - t
with backward noise B^_s = B_{T'-s} - B_{T'}, which reads the forward path on
[t - n_max, t]. Every start uses the forward driver W from its own origin, so
fields at different t and anchors share their forward randomness.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from bdsde import noise
from bdsde.exceptions import SpanError, ValidationError
from bdsde.forward import euler_maruyama
from bdsde.infinite import LadderSettings, solve_horizon_ladder
from bdsde.noise import ShiftOp, grid_index
from bdsde.spde import extract_field
from bdsde.weighted_space import weighted_l2_norm

logger = logging.getLogger(__name__)

KS_LEVEL = 0.05


def _key(t):
    return round(float(t), 9)


@dataclass
class StationaryRun:
    path: object
    Tprime: float
    times: tuple
    fields: dict = field(default_factory=dict)
    solutions: dict = field(default_factory=dict)
    ladders: dict = field(default_factory=dict)
    offsets: tuple = ()

    def field_at(self, t):
        return self.fields[_key(t)]

    def solution_at(self, t):
        return self.solutions[_key(t)]

    def cloud_mean(self, t):
        """Weighted cloud average of v_t, one scalar per replica."""
        solution = self.solution_at(t)
        return float(solution.ensemble.weights @ self.field_at(t).u)


def build_stationary_solution(problem, path, Tprime, times, cloud, space, driver, settings=None):
    """v_t for every t in `times` from the two-sided path `path` reversed at T'."""
    settings = settings or LadderSettings()
    times = tuple(float(t) for t in times)
    if any(t < 0.0 or t > Tprime for t in times):
        raise ValidationError("sampled times must lie in [0, T'={}], got {}".format(Tprime, times))
    reversed_path = noise.time_reverse(path, Tprime)
    n_steps = settings.n_max * grid_index(1.0, path.dt, "unit time")
    run = StationaryRun(path, Tprime, times)
    for t in times:
        start = Tprime - t
        ensemble = euler_maruyama(start, cloud, problem.diffusion, driver, n_steps)
        solution, ladder = solve_horizon_ladder(problem, ensemble, reversed_path, space, settings)
        run.solutions[_key(t)] = solution
        run.ladders[_key(t)] = ladder
        run.fields[_key(t)] = extract_field(solution, start)
    return run


def build_replicas(problem, cloud, space, settings, Tprime, times, n_replicas, seed, dt, span,
                   shift_by=0.0, workers=1, first_path=0):
    """One StationaryRun per replica i on the paths with path_id = first_path + i, optionally shifted by theta_r."""

    def one(i):
        driver, path = noise.sample_paths(problem.noise, dt, span, seed, cloud.size, path_id=first_path + i)
        if shift_by:
            path = noise.shift(path, ShiftOp(shift_by))
        run = build_stationary_solution(problem, path, Tprime, times, cloud, space, driver, settings)
        run.offsets = (shift_by,)
        return run

    if workers <= 1:
        runs = [one(i) for i in range(n_replicas)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(n_replicas)))
    logger.info("built %d stationary replicas at t=%s (T'=%g)", n_replicas, list(times), Tprime)
    return runs


@dataclass(frozen=True)
class ShiftStationarityReport:
    t: float
    r: float
    pathwise: tuple
    ks_statistic: float
    ks_pvalue: float
    replica_ks_statistic: float
    replica_ks_pvalue: float
    marginal_ks_statistic: float
    marginal_ks_pvalue: float

    @property
    def max_pathwise(self):
        return max(self.pathwise) if self.pathwise else 0.0

    @property
    def significant(self):
        return self.replica_ks_pvalue < KS_LEVEL

    def to_dict(self):
        return {
            't': self.t, 'r': self.r, 'replicas': len(self.pathwise), 'max_pathwise': self.max_pathwise,
            'mean_pathwise': float(np.mean(self.pathwise)) if self.pathwise else 0.0,
            'ks_statistic': self.ks_statistic, 'ks_pvalue': self.ks_pvalue,
            'replica_ks_statistic': self.replica_ks_statistic, 'replica_ks_pvalue': self.replica_ks_pvalue,
            'marginal_ks_statistic': self.marginal_ks_statistic, 'marginal_ks_pvalue': self.marginal_ks_pvalue,
        }


def check_shift_stationarity(runs, shifted_runs, t, r, space):
    """Compare v_{t+r}(omega) from `runs` with v_t(theta_r omega) from `shifted_runs`.

    Both lists are indexed by replica; each run in `runs` must hold fields at
    t and t + r, each shifted run a field at t built on theta_r of the same
    path. Reports the per-replica L^2_rho differences and three two-sample
    KS tests: on the pooled point values, on the per-replica cloud means of
    both sides, and between the marginal samples of v_t and v_{t+r}. Points
    of one replica are not independent, so only the replica-level tests
    carry a meaningful p-value.
    """
    if len(runs) != len(shifted_runs):
        raise ValidationError("need one shifted run per replica")
    grid_index(r, runs[0].path.dt, "shift offset")
    pathwise, later, moved = [], [], []
    for run, shifted in zip(runs, shifted_runs):
        a = run.field_at(t + r).u
        b = shifted.field_at(t).u
        pathwise.append(weighted_l2_norm(a - b, run.solution_at(t + r).ensemble, space))
        later.append(a)
        moved.append(b)
    pooled = stats.ks_2samp(np.concatenate(later), np.concatenate(moved))
    paired = stats.ks_2samp([run.cloud_mean(t + r) for run in runs], [run.cloud_mean(t) for run in shifted_runs])
    marginal = stats.ks_2samp([run.cloud_mean(t) for run in runs], [run.cloud_mean(t + r) for run in runs])
    report = ShiftStationarityReport(t, r, tuple(pathwise), float(pooled.statistic), float(pooled.pvalue),
                                     float(paired.statistic), float(paired.pvalue),
                                     float(marginal.statistic), float(marginal.pvalue))
    logger.info("shift check t=%g r=%g: max pathwise %.3e, replica KS p=%.3f",
                t, r, report.max_pathwise, report.replica_ks_pvalue)
    return report


def check_Tprime_independence(problem, path, t, Tp1, Tp2, cloud, space, driver, settings=None, eps=1e-12):
    """||v_t^{(T'_1)} - v_t^{(T'_2)}||_{L^2_rho} / max(||v_t^{(T'_1)}||, eps) on the same path."""
    if t > min(Tp1, Tp2):
        raise ValidationError("t={} exceeds the smaller anchor {}".format(t, min(Tp1, Tp2)))
    first = build_stationary_solution(problem, path, Tp1, (t,), cloud, space, driver, settings)
    second = build_stationary_solution(problem, path, Tp2, (t,), cloud, space, driver, settings)
    ensemble = first.solution_at(t).ensemble
    u1, u2 = first.field_at(t).u, second.field_at(t).u
    return weighted_l2_norm(u1 - u2, ensemble, space) / max(weighted_l2_norm(u1, ensemble, space), eps)


def stationary_sample(runs, t):
    """Per-replica cloud averages of v_t with their mean, variance and standard error."""
    sample = np.array([run.cloud_mean(t) for run in runs])
    n = sample.size
    var = float(sample.var(ddof=1)) if n > 1 else 0.0
    return {'t': t, 'n': n, 'mean': float(sample.mean()), 'variance': var,
            'standard_error': float(np.sqrt(var / n)) if n > 1 else 0.0}


class ScalarStepper(object):
    """Pointwise forward Euler for sigma = 0, b = 0: dv = f dt + sum_j g_j dB_j."""

    def __init__(self, problem):
        self.problem = problem

    def evolve(self, run, t):
        x = np.asarray(run.field_at(0.0).particles)
        diffusion = self.problem.diffusion
        if np.any(diffusion.b(x) != 0.0) or np.any(diffusion.sigma(x) != 0.0):
            raise ValidationError("the scalar stepper needs b = 0 and sigma = 0")
        dt = run.path.dt
        dB = run.path.increments(0.0, t)
        v = np.array(run.field_at(0.0).u, dtype=float)
        z = np.zeros_like(x)
        for k in range(dB.shape[0]):
            r_k = k * dt
            v = (v + dt * self.problem.eval_f(r_k, x, v, z)
                 + self.problem.eval_g(r_k, x, v, z) @ dB[k])
        return v


class SpectralHeatStepper(object):
    """Exponential Euler on a periodic box for b = 0, sigma = 1 in one dimension.

    The linear part 1/2 v'' - mu v is stepped exactly in Fourier space; the
    rest of f and the noise term are explicit.
    """

    def __init__(self, problem, half_width=20.0, n_grid=512):
        if problem.dimension != 1:
            raise ValidationError("the spectral stepper works in one dimension")
        self.problem = problem
        self.half_width = float(half_width)
        self.grid = np.linspace(-half_width, half_width, n_grid, endpoint=False)
        self.wavenumbers = 2.0 * np.pi * np.fft.fftfreq(n_grid, d=2.0 * half_width / n_grid)

    def evolve(self, run, t):
        points = np.asarray(run.field_at(0.0).particles)[:, 0]
        if np.any(points < self.grid[0]) or np.any(points > self.grid[-1]):
            raise SpanError("cloud reaches |x| = {:.3g}, outside the periodic box of half-width {:g}".format(
                float(np.max(np.abs(points))), self.half_width))
        problem = self.problem
        x = self.grid[:, None]
        diffusion = problem.diffusion
        if np.any(diffusion.b(x) != 0.0) or np.any(diffusion.sigma(x) != 1.0):
            raise ValidationError("the spectral stepper needs b = 0 and sigma = 1")
        dt = run.path.dt
        dB = run.path.increments(0.0, t)
        v = run.solution_at(0.0).y_fit(0).predict(x).reshape(-1)
        linear = np.exp((-0.5 * self.wavenumbers ** 2 - problem.mu) * dt)
        for k in range(dB.shape[0]):
            r_k = k * dt
            grad = np.real(np.fft.ifft(1j * self.wavenumbers * np.fft.fft(v)))[:, None]
            forcing = problem.eval_f(r_k, x, v, grad) + problem.mu * v
            kick = v + dt * forcing + problem.eval_g(r_k, x, v, grad) @ dB[k]
            v = np.real(np.fft.ifft(linear * np.fft.fft(kick)))
        return np.interp(points, self.grid, v)


def fixed_point_evolution_check(run, stepper, t, space):
    """||evolve(v_0 -> t) - v_t||_{L^2_rho}, with the same path driving both."""
    evolved = stepper.evolve(run, t)
    reference = run.field_at(t).u
    deviation = weighted_l2_norm(evolved - reference, run.solution_at(t).ensemble, space)
    logger.info("fixed-point evolution over [0, %g]: deviation %.4e", t, deviation)
    return deviation
