"""Experiment pipelines: wire a config to the problem bank and the solvers, collect a RunReport.

Exit statuses of `run`: 0 when every enabled assertion passes, 1 when an
assertion fails, 2 on configuration or hard condition errors, 3 when the
numerics diverge or produce non-finite values.
"""

import dataclasses
import logging
import math

import numpy as np

from bdsde import bank, noise
from bdsde.conditions import default_discount, validate_conditions_finite, validate_conditions_infinite
from bdsde.config import Pipeline
from bdsde.exceptions import ConfigurationError, DivergenceError, NumericalError, ValidationError
from bdsde.finite import picard_solve
from bdsde.forward import equivalence_norm_estimate, euler_maruyama, flow_property_check, shift_equivariance_check
from bdsde.infinite import LadderSettings, pth_moment_diagnostic, solve_horizon_ladder
from bdsde.noise import NoiseModel, grid_index
from bdsde.report import RunReport
from bdsde.spde import bump_family, extract_field, gradient_representation_check, weak_residual
from bdsde.stationary import (ScalarStepper, SpectralHeatStepper, build_replicas, check_shift_stationarity,
                              check_Tprime_independence, fixed_point_evolution_check, stationary_sample)
from bdsde.studies import (contraction_study, ou_moment_oracle, refinement_levels, replica_moments,
                           shift_ks_repetitions, weak_residual_study)
from bdsde.weighted_space import WeightedSpace, sample_reference_cloud, weighted_l2_norm

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

LADDER_SLACK = 1.1
PICARD_SLACK = 1.1
SPECTRAL_HALF_WIDTH = 20.0


@dataclasses.dataclass(frozen=True)
class Experiment:
    config: object
    problem: object
    space: object
    cloud: object
    force: bool = False

    @property
    def seed(self):
        return self.config.monte_carlo.seed

    @property
    def dt(self):
        return self.config.grid.dt

    @property
    def finite_problem(self):
        """The problem on a finite horizon: its own, or grid.horizon for infinite-horizon problems."""
        if self.problem.infinite:
            return dataclasses.replace(self.problem, horizon=self.config.grid.horizon, mu=self.problem.finite_mu)
        return self.problem


def build_problem(config):
    params = dict(config.problem.params)
    params.setdefault('dimension', config.space.dimension)
    problem = bank.get_problem(config.problem.name, **params)
    if problem.dimension != config.space.dimension:
        raise ConfigurationError("problem dimension {} differs from space dimension {}".format(
            problem.dimension, config.space.dimension))
    eigenvalues = config.noise.eigenvalues
    if eigenvalues is not None:
        if len(eigenvalues) != problem.n_modes:
            raise ConfigurationError("problem {!r} has {} noise modes, config gives {} eigenvalues".format(
                problem.name, problem.n_modes, len(eigenvalues)))
        problem = dataclasses.replace(problem, noise=NoiseModel(eigenvalues, problem.dimension))
    return problem


def prepare(config, force=False):
    space = WeightedSpace(config.space.dimension, config.space.q, config.space.p)
    problem = build_problem(config)
    cloud = sample_reference_cloud(config.monte_carlo.particles, space, config.monte_carlo.seed)
    return Experiment(config, problem, space, cloud, force)


def _field_table(report, name, snapshot):
    d = snapshot.particles.shape[1]
    table = report.table(name, ['x_{}'.format(i + 1) for i in range(d)] + ['u']
                         + ['grad_{}'.format(i + 1) for i in range(d)])
    for x, u, g in zip(snapshot.particles, snapshot.u, snapshot.grad):
        table.add(*(list(x) + [u] + list(g)))


def run_finite(exp, report):
    config = exp.config
    problem = exp.finite_problem
    solver = config.solver
    conditions = validate_conditions_finite(problem, solver.probes, exp.seed)
    report.section('conditions_finite', conditions.to_dict())
    conditions.enforce(exp.force)

    T = problem.horizon
    n_steps = grid_index(T, exp.dt, "horizon")
    driver, path = noise.sample_paths(problem.noise, exp.dt, T, exp.seed, exp.cloud.size)
    ensemble = euler_maruyama(0.0, exp.cloud, problem.diffusion, driver, n_steps)
    solution, picard = picard_solve(problem, ensemble, path.increments(0.0, T), solver.picard_iters,
                                    solver.picard_tol, solver.basis_spec(), solver.sweeps, space=exp.space,
                                    strict=False)
    report.section('picard', picard.to_dict())
    tail = picard.norms[1:]
    floor = 1e-12 * max(picard.norms)
    decreasing = all(b <= max(PICARD_SLACK * a, floor) for a, b in zip(tail, tail[1:]))
    report.check('picard_decreasing', decreasing, picard.norms, PICARD_SLACK)
    report.check('terminal_exact', np.array_equal(solution.Y[-1], problem.eval_h(ensemble.paths[-1])))
    norms = report.table('picard_norms', ['iteration', 'norm', 'ratio'])
    for i, value in enumerate(picard.norms):
        norms.add(i + 1, value, picard.ratios[i - 1] if i > 0 else float('nan'))

    snapshot = extract_field(solution, 0.0)
    _field_table(report, 'fields_finite', snapshot)

    residuals = report.table('residuals', ['test_function', 'residual'])
    values = {}
    for phi in bump_family(problem.dimension):
        values[phi.name] = weak_residual(solution, problem, phi, exp.space)
        residuals.add(phi.name, values[phi.name])
    gradient_gap = gradient_representation_check(solution, problem.diffusion, exp.space)
    report.section('spde', {'weak_residuals': values, 'gradient_discrepancy': gradient_gap})

    _forward_checks(exp, report, problem, ensemble, driver, n_steps)
    _finite_oracles(exp, report, problem, solution, values, gradient_gap, picard)
    _refinement_studies(exp, report, problem)


def _forward_checks(exp, report, problem, ensemble, driver, n_steps):
    diffusion = problem.diffusion
    middle = grid_index(problem.horizon / 2.0, exp.dt, "midpoint") if n_steps > 1 else 0
    flow = flow_property_check(ensemble, middle * exp.dt, diffusion)
    shift_steps = max(1, n_steps // 4)
    equivariance = shift_equivariance_check(0.0, shift_steps * exp.dt, exp.cloud, diffusion, driver, n_steps)
    report.check('flow_property_exact', flow == 0.0, flow, 0.0)
    report.check('shift_equivariance_exact', equivariance == 0.0, equivariance, 0.0)

    table = report.table('equivalence', ['test_function', 'pushforward', 'identity', 'ratio', 'ci_low', 'ci_high'])
    estimates = {}
    for phi in bump_family(problem.dimension)[:5]:
        est = equivalence_norm_estimate(phi, 0.0, problem.horizon, exp.cloud, diffusion,
                                        exp.config.monte_carlo.equivalence_paths, exp.seed, exp.dt, exp.space)
        lo, hi = est.confidence_interval
        table.add(phi.name, est.pushforward, est.identity, est.ratio, lo, hi)
        estimates[phi.name] = est.to_dict()
    report.section('forward', {'flow_deviation': flow, 'shift_deviation': equivariance, 'equivalence': estimates})
    bounded = all(e['ci_low'] > 0.0 and e['ci_high'] < 1e2 for e in estimates.values())
    report.check('equivalence_bounded', bounded, None, [0.0, 1e2])


def _finite_oracles(exp, report, problem, solution, residuals, gradient_gap, picard):
    params = problem.params
    tol = exp.config.tolerances
    name = problem.name
    if name == 'zero':
        exact = not np.any(solution.Y) and not np.any(solution.Z) and not any(residuals.values())
        report.check('zero_solution_exact', exact, None, 0.0)
    elif name == 'monotone_ode':
        oracle = bank.ode_oracle(solution.times, problem.horizon, params['mu'], params['c'])
        err = float(np.max(np.abs(solution.Y - oracle[:, None])))
        report.check('ode_oracle', err <= tol.ode_dt_factor * exp.dt, err, tol.ode_dt_factor * exp.dt)
    elif name == 'constant_drift_f':
        times = solution.times[:, None]
        oracle = solution.ensemble.paths[:, :, 0] + (params['speed'] + params['c']) * (problem.horizon - times)
        err = float(np.max(np.abs(solution.Y - oracle)))
        bound = 1e-6 * (1.0 + float(np.max(np.abs(oracle))))
        report.check('constant_drift_oracle', err <= bound, err, bound)
    elif name == 'linear_terminal':
        bound = tol.gradient_rel * abs(params['slope']) * math.sqrt(exp.space.normalizer)
        report.check('gradient_representation', gradient_gap <= bound, gradient_gap, bound)
    elif name == 'linear_g':
        window = picard.ratios[1:7]
        if window:
            report.check('picard_contraction', max(window) <= 0.75, max(window), 0.75)
    elif _pure_heat(problem):
        exact = bank.heat_bump_oracle(0.0, exp.cloud.particles, problem.horizon, params['mu'])
        gap = weighted_l2_norm(solution.Y[0] - exact, exp.cloud, exp.space)
        report.section('heat_oracle', {'l2_error': gap,
                                       'l2_norm': weighted_l2_norm(exact, exp.cloud, exp.space)})


def _pure_heat(problem):
    params = problem.params
    return problem.name == 'heat_bump' and not params.get('c') and not params.get('beta')


def _refinement_studies(exp, report, problem):
    """Contraction ratios for problems with a z-dependent g, weak residuals for the rest."""
    config = exp.config
    study = config.study
    if study.refinement_levels < 2:
        return
    tol = config.tolerances
    solver = config.solver
    particles = config.monte_carlo.particles
    if problem.sum_alpha > 0.0:
        levels = refinement_levels(exp.dt, particles, study.refinement_levels, growth=2)
        contraction = contraction_study(problem, exp.space, levels, solver.basis_spec(), exp.seed,
                                        sweeps=solver.sweeps)
        report.section('contraction_refinement', contraction.to_dict())
        table = report.table('contraction_refinement', ['dt', 'particles', 'max_ratio'])
        for level in contraction.levels:
            table.add(level.dt, level.particles, level.max_ratio)
        worst = max(contraction.max_ratios)
        report.check('contraction_levels', worst <= tol.contraction_ratio, worst, tol.contraction_ratio)
        report.check('contraction_tightening', contraction.tightening, list(contraction.max_ratios))
        return

    levels = refinement_levels(exp.dt, particles, study.refinement_levels, study.particle_growth)
    seeds = range(exp.seed, exp.seed + study.refinement_seeds)
    residual = weak_residual_study(problem, exp.space, levels, solver.basis_spec(), seeds,
                                   half_width=study.grid_half_width, sweeps=solver.sweeps,
                                   picard_iters=solver.picard_iters, picard_tol=solver.picard_tol)
    report.section('refinement', residual.to_dict())
    table = report.table('residual_refinement', ['phi_id', 'dt', 'particles', 'residual', 'normalizer'])
    for level in residual.levels:
        for name, gaps in level.gaps.items():
            for gap, normalizer in zip(gaps, level.normalizers[name]):
                table.add(name, level.dt, level.particles, gap, normalizer)
    if _pure_heat(problem):
        report.check('residual_refinement', min(residual.factors) >= tol.residual_factor, list(residual.factors),
                     tol.residual_factor)
        report.check('gradient_refinement', residual.gradient_decreasing, list(residual.gradient_factors), 1.0)


def _resolve_discount(exp):
    K = exp.config.solver.K
    if K is None:
        K = exp.problem.K if exp.problem.K is not None else default_discount(exp.problem, exp.space.p)
    return K


def _ladder_settings(exp, K):
    config = exp.config
    solver = config.solver
    return LadderSettings(K=K, n_max=config.grid.n_max, cauchy_tol=solver.cauchy_tol, window=solver.window,
                          first_rung=solver.first_rung, basis=solver.basis_spec(), sweeps=solver.sweeps,
                          picard_iters=solver.picard_iters, picard_tol=solver.picard_tol)


def _infinite_setup(exp, report):
    if not exp.problem.infinite:
        raise ConfigurationError("problem {!r} has a finite horizon {}; this pipeline needs an infinite one".format(
            exp.problem.name, exp.problem.horizon))
    K = _resolve_discount(exp)
    conditions = validate_conditions_infinite(exp.problem, exp.space.p, K, exp.space,
                                              exp.config.solver.probes, exp.seed)
    report.section('conditions_infinite', conditions.to_dict())
    conditions.enforce(exp.force)
    return K, _ladder_settings(exp, K)


def run_infinite(exp, report):
    problem = exp.problem
    K, settings = _infinite_setup(exp, report)
    n_steps = settings.n_max * grid_index(1.0, exp.dt, "unit time")
    driver, path = noise.sample_paths(problem.noise, exp.dt, settings.n_max, exp.seed, exp.cloud.size)
    ensemble = euler_maruyama(0.0, exp.cloud, problem.diffusion, driver, n_steps)
    solution, ladder = solve_horizon_ladder(problem, ensemble, path, exp.space, settings)
    report.section('ladder', ladder.to_dict())
    table = report.table('ladder', ['rung', 'full_norm', 'window_norm'])
    for row in zip(ladder.rungs, ladder.full_norms, ladder.window_norms):
        table.add(*row)

    w = ladder.window_norms
    decreasing = all(b <= LADDER_SLACK * a for a, b in zip(w, w[1:]))
    report.check('ladder_decreasing', decreasing, w, LADDER_SLACK)
    if ladder.base is not None:
        tol = exp.config.tolerances
        bound = min(1.0, math.exp(-problem.mu) + tol.ladder_base_slack) if problem.L == 0.0 else 1.0
        report.check('ladder_geometric', ladder.base < 1.0 and ladder.base <= bound, ladder.base, bound)

    moment = pth_moment_diagnostic(solution, exp.space.p, K, ensemble, exp.space)
    report.section('moment', {'p': exp.space.p, 'K': K, 'value': moment})
    report.check('moment_finite', math.isfinite(moment), moment)
    if problem.name == 'ou_additive' and exp.config.study.moment_replicas > 0:
        _moment_oracle(exp, report, settings, K)
    _field_table(report, 'fields_infinite', extract_field(solution, 0.0))

    if problem.name == 'zero':
        report.check('zero_ladder_exact', not np.any(solution.Y) and not any(w), None, 0.0)
    elif problem.name == 'monotone_ode':
        params = problem.params
        rung = ladder.stopped_at or settings.n_max
        oracle = bank.ode_oracle(0.0, float(rung), params['mu'], params['c'])
        err = float(np.max(np.abs(solution.Y[0] - oracle)))
        bound = exp.config.tolerances.ode_dt_factor * exp.dt
        report.check('ladder_ode_oracle', err <= bound, err, bound)


def _moment_oracle(exp, report, settings, K):
    """Replica-averaged Z |Y_0|^p against the Gaussian stationary law, and its stability under M -> 2M."""
    config = exp.config
    tol = config.tolerances
    p = exp.space.p
    replicas = config.study.moment_replicas
    study = replica_moments(exp.problem, exp.space, settings, config.monte_carlo.particles, replicas, exp.seed,
                            exp.dt, p, K, doubled_replicas=max(2, replicas // 4))
    oracle = ou_moment_oracle(exp.problem, exp.space, p)
    rel = abs(study.mean / oracle - 1.0)
    report.section('moment_oracle', dict(study.to_dict(), oracle=oracle, relative_error=rel))
    report.check('moment_oracle', rel <= tol.moment_rel, study.mean, [oracle, tol.moment_rel])
    drift = abs(study.doubling_ratio - 1.0)
    report.check('moment_doubling', drift <= tol.moment_rel, study.doubling_ratio, [1.0, tol.moment_rel])


def _span(exp):
    grid = exp.config.grid
    if exp.config.noise.span is not None:
        span = exp.config.noise.span
    else:
        span = 2.0 * max(grid.Tprime, grid.Tprime_alt) + grid.n_max + grid.shift
    return math.ceil(span / exp.dt - 1e-9) * exp.dt


def _pick_stepper(problem, cloud):
    name = problem.diffusion.name
    if name == 'zero':
        return ScalarStepper(problem)
    if name == 'brownian' and problem.dimension == 1:
        half_width = max(SPECTRAL_HALF_WIDTH, 1.5 * float(np.max(np.abs(cloud.particles))))
        return SpectralHeatStepper(problem, half_width, 512 * math.ceil(half_width / SPECTRAL_HALF_WIDTH))
    return None


def run_stationarity(exp, report):
    problem = exp.problem
    config = exp.config
    grid = config.grid
    mc = config.monte_carlo
    tol = config.tolerances
    _, settings = _infinite_setup(exp, report)
    span = _span(exp)
    times = tuple(float(t) for t in grid.times)
    t0, r = times[0], float(grid.shift)
    all_times = tuple(sorted(set(round(t, 9) for t in times + (t0 + r,))))

    runs = build_replicas(problem, exp.cloud, exp.space, settings, grid.Tprime, all_times, mc.replicas,
                          exp.seed, exp.dt, span, workers=mc.workers)
    shifted = build_replicas(problem, exp.cloud, exp.space, settings, grid.Tprime, (t0,), mc.replicas,
                             exp.seed, exp.dt, span, shift_by=r, workers=mc.workers)

    identity = check_shift_stationarity(runs, runs, t0, 0.0, exp.space)
    report.check('shift_zero_exact', identity.max_pathwise == 0.0, identity.max_pathwise, 0.0)
    shift_report = check_shift_stationarity(runs, shifted, t0, r, exp.space)
    report.check('shift_ks', shift_report.replica_ks_pvalue >= tol.ks_level, shift_report.replica_ks_pvalue,
                 tol.ks_level)
    repetitions = {}
    study = config.study
    if study.repetitions > 0:
        repeated = shift_ks_repetitions(problem, exp.cloud, exp.space, settings, grid.Tprime, t0, r,
                                        study.repetition_replicas, study.repetitions, exp.seed, exp.dt, span,
                                        mc.workers, tol.ks_level)
        needed = int(math.ceil(study.ks_pass_fraction * study.repetitions - 1e-9))
        report.check('shift_ks_repetitions', repeated.passes >= needed, repeated.passes, needed)
        repetitions = repeated.to_dict()

    moments = {}
    table = report.table('stationary_moments', ['t', 'n', 'mean', 'variance', 'standard_error'])
    for t in times:
        sample = stationary_sample(runs, t)
        moments[str(t)] = sample
        table.add(t, sample['n'], sample['mean'], sample['variance'], sample['standard_error'])
    _field_table(report, 'fields_stationary', runs[0].field_at(t0))
    _stationary_oracles(exp, report, runs, moments)

    t_anchor = times[1] if len(times) > 1 else t0
    anchors = {}
    if t_anchor <= min(grid.Tprime, grid.Tprime_alt):
        driver, path = noise.sample_paths(problem.noise, exp.dt, span, exp.seed, exp.cloud.size, path_id=0)
        rel = check_Tprime_independence(problem, path, t_anchor, grid.Tprime, grid.Tprime_alt, exp.cloud,
                                        exp.space, driver, settings)
        anchors = {'t': t_anchor, 'Tprime': grid.Tprime, 'Tprime_alt': grid.Tprime_alt, 'relative_difference': rel}
        report.check('Tprime_independence', rel <= tol.Tprime_rel, rel, tol.Tprime_rel)

    fixed_point = {}
    stepper = _pick_stepper(problem, exp.cloud)
    later = [t for t in all_times if t > 0.0]
    if stepper is not None and 0.0 in all_times and later:
        t_end = later[0]
        deviation = fixed_point_evolution_check(runs[0], stepper, t_end, exp.space)
        scale = weighted_l2_norm(runs[0].field_at(t_end).u, runs[0].solution_at(t_end).ensemble, exp.space)
        fixed_point = {'t': t_end, 'stepper': type(stepper).__name__, 'deviation': deviation, 'norm': scale}
        report.check('fixed_point_evolution', deviation <= tol.fixed_point_rel * scale or deviation == 0.0,
                     deviation, tol.fixed_point_rel * scale)

    report.section('stationarity', {
        'replicas': mc.replicas, 'span': span, 'times': list(all_times),
        'shift': shift_report.to_dict(), 'shift_zero': identity.to_dict(), 'shift_repetitions': repetitions,
        'moments': moments, 'Tprime_independence': anchors, 'fixed_point': fixed_point,
    })


def _stationary_oracles(exp, report, runs, moments):
    problem = exp.problem
    params = problem.params
    tol = exp.config.tolerances
    if problem.name == 'zero':
        exact = all(not np.any(run.field_at(t).u) for run in runs for t in run.times)
        report.check('zero_stationary_exact', exact, None, 0.0)
    elif problem.name == 'ou_additive':
        mean, variance = bank.ou_stationary_moments(params['mu'], params['c'], params['beta'])
        for t, sample in sorted(moments.items()):
            report.check('stationary_mean[t={}]'.format(t),
                         abs(sample['mean'] - mean) <= tol.mean_se * sample['standard_error'],
                         sample['mean'], [mean, tol.mean_se * sample['standard_error']])
            report.check('stationary_variance[t={}]'.format(t),
                         abs(sample['variance'] - variance) <= tol.variance_rel * variance,
                         sample['variance'], [variance, tol.variance_rel * variance])
    elif problem.name == 'monotone_ode':
        level = params['c'] / params['mu']
        err = max(float(np.max(np.abs(run.field_at(t).u - level))) for run in runs for t in run.times)
        bound = tol.ode_dt_factor * exp.dt + math.exp(-params['mu'] * exp.config.grid.n_max) * abs(level)
        report.check('stationary_ode_level', err <= bound, err, bound)


_STAGES = (
    (Pipeline.FINITE, run_finite, False),
    (Pipeline.INFINITE, run_infinite, True),
    (Pipeline.STATIONARITY, run_stationarity, True),
)


def run(config, force=False, write=True):
    """Execute the configured pipeline; returns (exit status, RunReport)."""
    report = RunReport(config)
    status = EXIT_OK
    try:
        exp = prepare(config, force)
        for stage, fn, needs_infinite in _STAGES:
            if config.pipeline not in (stage, Pipeline.FULL):
                continue
            if needs_infinite and config.pipeline == Pipeline.FULL and not exp.problem.infinite:
                logger.info("skipping %s stage: problem %r has a finite horizon", stage, exp.problem.name)
                continue
            logger.info("running %s stage for %r", stage, exp.problem.name)
            fn(exp, report)
    except (ConfigurationError, ValidationError) as e:
        logger.error("configuration error: %s", e)
        report.error = {'kind': type(e).__name__, 'message': str(e)}
        status = EXIT_CONFIG
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        report.error = {'kind': type(e).__name__, 'message': str(e), 'particle': e.particle}
        if isinstance(e, DivergenceError):
            report.error.update(history=e.history, ratios=e.ratios)
        status = EXIT_NUMERICAL
    if status == EXIT_OK and not report.passed:
        logger.warning("failed assertions: %s", ", ".join(report.failures()))
        status = EXIT_ASSERTION
    if write:
        report.write()
    return status, report


def validate(config):
    """Condition reports for the configured problem without solving; returns (all passed, reports)."""
    exp = prepare(config)
    reports = {'finite': validate_conditions_finite(exp.finite_problem, config.solver.probes, exp.seed)}
    if exp.problem.infinite:
        reports['infinite'] = validate_conditions_infinite(exp.problem, exp.space.p, _resolve_discount(exp),
                                                           exp.space, config.solver.probes, exp.seed)
    return all(r.passed for r in reports.values()), reports
