"""Machine-checkable versions of the structural conditions on a BDSDE problem.

Numeric inequalities between declared constants are checked exactly; the
Lipschitz, growth and monotonicity bounds on the coefficient handles are
probed on random samples; measurability, continuity and smoothness cannot
be decided from a function handle and are recorded as asserted.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from bdsde import rng
from bdsde.exceptions import ConditionError, ConfigurationError
from bdsde.utils.enum import Enum, EnumValue

logger = logging.getLogger(__name__)

PROBE_SAMPLES = 1000
PROBE_RANGE = 20.0
_REL = 1e-9
_ABS = 1e-12


class ConditionStatus(Enum):
    PASS = EnumValue(0)
    FAIL = EnumValue(1)
    ASSERTED = EnumValue(2)


@dataclass(frozen=True)
class ConditionResult:
    name: str
    status: EnumValue
    evidence: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self):
        return {'name': self.name, 'status': self.status.name.lower(),
                'evidence': self.evidence, 'message': self.message}


@dataclass(frozen=True)
class ConditionReport:
    kind: str
    results: tuple

    @property
    def passed(self):
        return not self.failures()

    def failures(self):
        return [r.name for r in self.results if r.status == ConditionStatus.FAIL]

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def __iter__(self):
        return iter(self.results)

    def to_dict(self):
        return {'kind': self.kind, 'passed': self.passed, 'results': [r.to_dict() for r in self.results]}

    def enforce(self, force=False):
        """Raise ConditionError on failures, or only warn when `force` is set."""
        failed = self.failures()
        if not failed:
            return self
        message = "{} conditions failed: {}".format(self.kind, ", ".join(failed))
        if force:
            logger.warning("%s (continuing because of --force)", message)
            return self
        raise ConditionError(message, report=self)


@dataclass(frozen=True)
class _Probes:
    r: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    z1: np.ndarray
    z2: np.ndarray


def _probes(problem, n, seed):
    gen = rng.substream(seed, rng.PROBE, 1)
    d = problem.dimension
    top = problem.horizon if problem.horizon else 10.0
    return _Probes(
        r=gen.uniform(0.0, top, n),
        x1=3.0 * gen.standard_normal((n, d)),
        x2=3.0 * gen.standard_normal((n, d)),
        y1=gen.uniform(-PROBE_RANGE, PROBE_RANGE, n),
        y2=gen.uniform(-PROBE_RANGE, PROBE_RANGE, n),
        z1=gen.uniform(-PROBE_RANGE, PROBE_RANGE, (n, d)),
        z2=gen.uniform(-PROBE_RANGE, PROBE_RANGE, (n, d)),
    )


def _pointwise(fn, r, x, y, z):
    # Probe points carry their own time, so coefficients are evaluated one at a time.
    return np.array([float(np.asarray(fn(r[i], x[i:i + 1], y[i:i + 1], z[i:i + 1])).reshape(-1)[0])
                     for i in range(r.shape[0])])


def _exceeds(lhs, rhs):
    return int(np.sum(lhs > rhs * (1.0 + _REL) + _ABS))


def _sq(v):
    v = np.asarray(v)
    return v ** 2 if v.ndim == 1 else np.sum(v ** 2, axis=1)


def _lipschitz_violations(problem, probes, with_x):
    """Counts of probe pairs breaking the Lipschitz bounds of f (in z) and g_j (in y, z)."""
    P = probes
    x2 = P.x2 if with_x else P.x1
    dx2 = _sq(P.x1 - x2)
    f1 = _pointwise(problem.f, P.r, P.x1, P.y1, P.z1)
    f2 = _pointwise(problem.f, P.r, x2, P.y1, P.z2)
    f_bound = problem.C * _sq(P.z1 - P.z2) + (problem.M * dx2 if with_x else 0.0)
    f_bad = _exceeds((f1 - f2) ** 2, f_bound)
    g_bad = 0
    for j, g_j in enumerate(problem.g):
        g1 = _pointwise(g_j, P.r, P.x1, P.y1, P.z1)
        g2 = _pointwise(g_j, P.r, x2, P.y2, P.z2)
        bound = problem.C_j[j] * (P.y1 - P.y2) ** 2 + problem.alpha[j] * _sq(P.z1 - P.z2)
        if with_x:
            bound = bound + problem.M_j[j] * dx2
        g_bad += _exceeds((g1 - g2) ** 2, bound)
    return f_bad, g_bad


def _growth_violations(problem, probes, M0):
    P = probes
    f = np.abs(_pointwise(problem.f, P.r, P.x1, P.y1, P.z1))
    return _exceeds(f, M0 * (1.0 + np.abs(P.y1) + np.sqrt(_sq(P.z1))))


def _monotonicity_violations(problem, probes, bound):
    P = probes
    f1 = _pointwise(problem.f, P.r, P.x1, P.y1, P.z1)
    f2 = _pointwise(problem.f, P.r, P.x1, P.y2, P.z1)
    dy = P.y1 - P.y2
    lhs = dy * (f1 - f2)
    rhs = bound * dy ** 2
    return int(np.sum(lhs > rhs + _REL * np.abs(rhs) + _ABS))


def _weighted_moment(fn, problem, power, seed, n):
    """Monte Carlo value of int |fn(x)|^power rho^-1 dx / Z_rho under a q=5 reference weight."""
    gen = rng.substream(seed, rng.PROBE, 2)
    u = gen.random(n)
    radius = np.expm1(-np.log1p(-u) / 4.0)
    direction = gen.standard_normal((n, problem.dimension))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    x = radius[:, None] * direction
    values = np.abs(np.asarray(fn(x), dtype=float)) ** power
    return float(np.mean(values))


def _g_at_zero(problem, r=0.0):
    def evaluate(x):
        zeros_y = np.zeros(x.shape[0])
        zeros_z = np.zeros_like(x)
        return np.sqrt(sum(np.asarray(g_j(r, x, zeros_y, zeros_z), dtype=float) ** 2 for g_j in problem.g))
    return evaluate


def _result(name, ok, evidence, message=""):
    status = ConditionStatus.PASS if ok else ConditionStatus.FAIL
    return ConditionResult(name, status, evidence, message)


def validate_conditions_finite(problem, n_probes=PROBE_SAMPLES, seed=0):
    """Evaluate (H.1)-(H.7) for a finite-horizon problem."""
    probes = _probes(problem, n_probes, seed)
    results = []

    h_moment = _weighted_moment(problem.h, problem, 2.0, seed, n_probes)
    results.append(ConditionResult(
        "H.1", ConditionStatus.ASSERTED if np.isfinite(h_moment) else ConditionStatus.FAIL,
        {'h_second_moment': h_moment, 'terminal_measurable': problem.terminal_measurable},
        "measurability of h is asserted"))

    f_bad, g_bad = _lipschitz_violations(problem, probes, with_x=False)
    results.append(_result(
        "H.2", problem.sum_alpha < 0.5 and f_bad == 0 and g_bad == 0,
        {'sum_alpha': problem.sum_alpha, 'sum_C_j': problem.sum_C,
         'f_z_violations': f_bad, 'g_violations': g_bad},
        "sum(alpha_j) must be < 1/2" if problem.sum_alpha >= 0.5 else ""))

    g_moment = _weighted_moment(_g_at_zero(problem), problem, 2.0, seed, n_probes)
    results.append(_result("H.3", np.isfinite(g_moment), {'g0_second_moment': g_moment}))

    growth = _growth_violations(problem, probes, problem.M0)
    results.append(_result("H.4", growth == 0, {'M0': problem.M0, 'violations': growth}))

    mono = _monotonicity_violations(problem, probes, problem.finite_mu)
    results.append(_result("H.5", mono == 0, {'mu': problem.finite_mu, 'violations': mono}))

    results.append(ConditionResult("H.6", ConditionStatus.ASSERTED, {}, "continuity of f in (y, z) is asserted"))

    worst, lip_bad = problem.diffusion.lipschitz_probe(seed, n_probes, bound=problem.L)
    results.append(ConditionResult(
        "H.7", ConditionStatus.ASSERTED, {'L': problem.L, 'observed_lipschitz': worst,
                                          'lipschitz_violations': lip_bad},
        "smoothness of b and sigma is asserted"))

    report = ConditionReport("finite", tuple(results))
    _log_report(report)
    return report


def a4_margin(problem, p, K):
    return 2.0 * problem.mu - p * K - p * problem.C - p * (p - 1.0) / 2.0 * problem.sum_C


def a6_margin(problem, p, K):
    L = problem.L
    return K - p * L - p * (p - 1.0) / 2.0 * L ** 2


def validate_conditions_infinite(problem, p, K, space=None, n_probes=PROBE_SAMPLES, seed=0):
    """Evaluate (A.1)-(A.6) for an infinite-horizon problem with discount K."""
    probes = _probes(problem, n_probes, seed)
    results = []

    f_bad, g_bad = _lipschitz_violations(problem, probes, with_x=True)
    results.append(_result(
        "A.1", problem.sum_alpha < 0.5 and f_bad == 0 and g_bad == 0,
        {'sum_alpha': problem.sum_alpha, 'sum_C_j': problem.sum_C, 'sum_M_j': float(sum(problem.M_j)),
         'f_violations': f_bad, 'g_violations': g_bad},
        "sum(alpha_j) must be < 1/2" if problem.sum_alpha >= 0.5 else ""))

    g_moment = _weighted_moment(_g_at_zero(problem), problem, p, seed, n_probes)
    in_range = p > 2.0 and (space is None or p < space.q - 1.0)
    results.append(_result("A.2", in_range and np.isfinite(g_moment),
                           {'p': p, 'q': None if space is None else space.q, 'g0_pth_moment': g_moment}))

    growth = _growth_violations(problem, probes, problem.M0)
    results.append(_result("A.3", growth == 0, {'M0': problem.M0, 'violations': growth}))

    margin = a4_margin(problem, p, K)
    mono = _monotonicity_violations(problem, probes, -problem.mu)
    results.append(_result("A.4", problem.mu > 0.0 and margin > 0.0 and mono == 0,
                           {'mu': problem.mu, 'K': K, 'margin': margin, 'violations': mono}))

    results.append(ConditionResult("A.5", ConditionStatus.ASSERTED, {}, "continuity of f in (y, z) is asserted"))

    margin6 = a6_margin(problem, p, K)
    worst, lip_bad = problem.diffusion.lipschitz_probe(seed, n_probes, bound=problem.L)
    results.append(_result("A.6", margin6 > 0.0 and lip_bad == 0,
                           {'L': problem.L, 'K': K, 'margin': margin6,
                            'observed_lipschitz': worst, 'lipschitz_violations': lip_bad},
                           "smoothness of b and sigma is asserted"))

    report = ConditionReport("infinite", tuple(results))
    _log_report(report)
    return report


def _log_report(report):
    for r in report:
        logger.debug("%s %s: %s", report.kind, r.name, r.status)
    if not report.passed:
        logger.info("%s conditions failed: %s", report.kind, ", ".join(report.failures()))


def _root(fn, scale):
    lo, hi = -scale, scale
    if fn(lo) * fn(hi) > 0:
        raise ConfigurationError("no sign change of the margin on [{}, {}]".format(lo, hi))
    return optimize.brentq(fn, lo, hi, xtol=1e-14)


def default_discount(problem, p, headroom=0.1):
    """Discount K placed `headroom` of the way into the interval allowed by (A.4) and (A.6)."""
    L = problem.L
    scale = 10.0 * (1.0 + abs(problem.mu) + p * L + p * p * L * L + p * problem.C + p * p * problem.sum_C)
    lower = max(_root(lambda k: a6_margin(problem, p, k), scale), 0.0)
    upper = _root(lambda k: a4_margin(problem, p, k), scale)
    if not upper > lower:
        raise ConfigurationError(
            "no discount K satisfies both margins for p={}: need K > {:.6g} and K < {:.6g}".format(p, lower, upper))
    K = lower + headroom * (upper - lower)
    logger.info("default discount K=%.6g from feasible interval (%.6g, %.6g)", K, lower, upper)
    return K


def picard_weight(problem):
    """Weight K of the Picard norm: 2mu + 2C + sum C_j / (2 sum alpha_j), or 2|mu| + 2C + 1."""
    mu = problem.finite_mu
    if problem.sum_alpha > 0.0:
        return 2.0 * mu + 2.0 * problem.C + problem.sum_C / (2.0 * problem.sum_alpha)
    return 2.0 * abs(mu) + 2.0 * problem.C + 1.0
