"""Infinite-horizon BDSDE by the horizon ladder: zero terminal data at T = start + r, r = 1, 2, ...

All rungs share one forward ensemble and one backward noise window, so the
difference between consecutive rungs isolates the horizon effect. Rung
differences are measured in the discounted combined norm

    int e^{-K(s - start)} (||dY(s)||^2 + ||dZ(s)||^2) ds

both over the whole ladder grid and over an early window [start, start + w],
which carries the stopping rule.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bdsde.conditions import default_discount
from bdsde.exceptions import DivergenceError, MomentBlowUpError, ValidationError
from bdsde.finite import picard_solve
from bdsde.noise import grid_index
from bdsde.regression import BasisSpec
from bdsde.weighted_space import DiscountedNormSpec, discounted_l2_process_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LadderSettings:
    K: float = None
    n_max: int = 10
    cauchy_tol: float = 1e-3
    window: float = 1.0
    first_rung: int = 1
    basis: BasisSpec = field(default_factory=BasisSpec)
    sweeps: int = 2
    picard_iters: int = 30
    picard_tol: float = 1e-10

    def __post_init__(self):
        if self.n_max < 1:
            raise ValidationError("n_max must be >= 1")
        if not 1 <= self.first_rung <= self.n_max:
            raise ValidationError("first rung must lie in [1, n_max]")
        if not self.cauchy_tol > 0.0 or not self.window > 0.0:
            raise ValidationError("cauchy_tol and window must be positive")


@dataclass
class LadderDiagnostics:
    K: float
    window: float
    rungs: list = field(default_factory=list)
    full_norms: list = field(default_factory=list)
    window_norms: list = field(default_factory=list)
    picard: list = field(default_factory=list)
    base: float = None
    converged: bool = False

    @property
    def stopped_at(self):
        return self.rungs[-1] if self.rungs else None

    def to_dict(self):
        return {
            'K': self.K, 'window': self.window, 'rungs': list(self.rungs),
            'full_norms': list(self.full_norms), 'window_norms': list(self.window_norms),
            'geometric_base': self.base, 'converged': self.converged, 'stopped_at': self.stopped_at,
            'picard': [d.to_dict() for d in self.picard],
        }


def _rung_distance(Y_a, Z_a, Y_b, Z_b, K, tau, window_nodes, cloud, space):
    full_spec = DiscountedNormSpec(K, tau)
    dY, dZ = Y_a - Y_b, Z_a - Z_b
    full = (discounted_l2_process_norm(dY, full_spec, cloud, space)
            + discounted_l2_process_norm(dZ, full_spec, cloud, space))
    win_spec = DiscountedNormSpec(K, tau[:window_nodes + 1])
    windowed = (discounted_l2_process_norm(dY[:window_nodes + 1], win_spec, cloud, space)
                + discounted_l2_process_norm(dZ[:window_nodes + 1], win_spec, cloud, space))
    return math.sqrt(full), math.sqrt(windowed)


def fit_geometric_base(rungs, norms):
    """exp(slope) of a least-squares line through (rung, log norm), or None with < 2 positive points."""
    pts = [(r, math.log(v)) for r, v in zip(rungs, norms) if v > 0.0]
    if len(pts) < 2:
        return None
    r, logv = np.array(pts).T
    slope = np.polyfit(r, logv, 1)[0]
    return float(math.exp(slope))


def solve_horizon_ladder(problem, ensemble, backward_path, space, settings=None):
    """Solve rungs first_rung..n_max and return the last rung with its LadderDiagnostics.

    `ensemble` must cover n_max units of time from its start; `backward_path`
    supplies the backward noise on the same window.
    """
    settings = settings or LadderSettings()
    dt = ensemble.dt
    start = ensemble.start_time
    per_unit = grid_index(1.0, dt, "unit time")
    n_total = settings.n_max * per_unit
    if ensemble.n_steps < n_total:
        raise ValidationError("ensemble covers {} steps, the ladder needs {}".format(ensemble.n_steps, n_total))
    K = settings.K if settings.K is not None else (problem.K if problem.K is not None
                                                   else default_discount(problem, space.p))
    dB = backward_path.increments(start, start + settings.n_max)
    tau = np.arange(n_total + 1) * dt
    window_nodes = min(grid_index(settings.window, dt, "ladder window"), n_total)

    diagnostics = LadderDiagnostics(K, settings.window)
    previous = None
    solution = None
    for r in range(settings.first_rung, settings.n_max + 1):
        n = r * per_unit
        rung_problem = problem.rung(start + r)
        solution, picard = picard_solve(rung_problem, ensemble.truncated(n), dB[:n],
                                        max_iters=settings.picard_iters, tol=settings.picard_tol,
                                        basis=settings.basis, sweeps=settings.sweeps, space=space)
        diagnostics.picard.append(picard)
        current = solution.extended(n_total)
        if previous is not None:
            full, windowed = _rung_distance(current[0], current[1], previous[0], previous[1], K, tau,
                                            window_nodes, ensemble, space)
            diagnostics.rungs.append(r)
            diagnostics.full_norms.append(full)
            diagnostics.window_norms.append(windowed)
            logger.debug("rung %d: windowed=%.4e full=%.4e", r, windowed, full)
            if windowed < settings.cauchy_tol:
                diagnostics.converged = True
                break
            w = diagnostics.window_norms
            if len(w) >= 3 and w[-1] >= w[-2] >= w[-3]:
                raise DivergenceError("rung differences did not decrease over rungs {}-{}".format(r - 2, r),
                                      history=w, ratios=[b / a if a > 0 else 0.0 for a, b in zip(w, w[1:])])
        previous = current

    diagnostics.base = fit_geometric_base(diagnostics.rungs, diagnostics.window_norms)
    if diagnostics.converged:
        logger.info("ladder converged at rung %d (K=%.4g)", diagnostics.stopped_at, K)
    else:
        logger.info("ladder stopped at n_max=%d without reaching cauchy_tol=%g", settings.n_max, settings.cauchy_tol)
    solution.diagnostics = diagnostics
    return solution, diagnostics


def pth_moment_diagnostic(solution, p, K, cloud, space, window=None):
    """max over nodes s <= start + window of e^{-pK(s-start)} Z_rho sum_i w_i |Y_s^i|^p."""
    Y = solution.Y
    tau = np.arange(Y.shape[0]) * solution.dt
    if window is not None:
        Y = Y[tau <= window + 1e-12]
        tau = tau[:Y.shape[0]]
    weights = np.asarray(cloud.weights)
    values = np.exp(-p * K * tau) * space.normalizer * (np.abs(Y) ** p @ weights)
    value = float(np.max(values))
    if not math.isfinite(value):
        raise MomentBlowUpError("p-th moment estimate is not finite (p={})".format(p))
    return value
