"""Finite-horizon BDSDE solver: regression backward recursion inside a Picard iteration.

The outer iteration freezes the backward-noise coefficients g_j at the
previous iterate (U, V) = (Y, Z), which turns each step into a standard
backward equation with a known stochastic forcing term. The inner solver
treats that equation by least-squares Monte Carlo on the particle ensemble.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from bdsde import regression
from bdsde.conditions import picard_weight
from bdsde.exceptions import DivergenceError, NumericalError, ValidationError
from bdsde.regression import BasisSpec

logger = logging.getLogger(__name__)


class BackwardSolution(object):
    """Per-node, per-particle (Y, Z) on the grid of an ensemble.

    Nodes beyond the terminal node read as zero, which is how horizon-ladder
    rungs are extended past their own horizon.
    """

    def __init__(self, ensemble, Y, Z, z_fits, backward_increments, basis, reduced=False):
        if Y.shape != ensemble.paths.shape[:2] or Z.shape != ensemble.paths.shape:
            raise ValidationError("solution arrays do not match the ensemble grid")
        self.ensemble = ensemble
        self.Y = Y
        self.Z = Z
        self.z_fits = tuple(z_fits)
        self.backward_increments = backward_increments
        self.basis = basis
        self.reduced = reduced
        self.diagnostics = None
        self._y_fits = {}
        Y.setflags(write=False)
        Z.setflags(write=False)

    @property
    def dt(self):
        return self.ensemble.dt

    @property
    def start_index(self):
        return self.ensemble.start_index

    @property
    def n_steps(self):
        return self.ensemble.n_steps

    @property
    def horizon_index(self):
        return self.ensemble.end_index

    @property
    def times(self):
        return self.ensemble.times

    def y_fit(self, k):
        """Regression interpolant x -> u(t_k, x) of the node-k values."""
        if k not in self._y_fits:
            self._y_fits[k] = regression.fit(self.ensemble.paths[k], self.Y[k], self.basis)
        return self._y_fits[k]

    def z_fit(self, k):
        return self.z_fits[k]

    def extended(self, n_steps):
        """(Y, Z) on `n_steps` steps from the start, zero beyond the terminal node."""
        if n_steps < self.n_steps:
            return self.Y[:n_steps + 1], self.Z[:n_steps + 1]
        M, d = self.Z.shape[1:]
        Y = np.zeros((n_steps + 1, M))
        Z = np.zeros((n_steps + 1, M, d))
        Y[:self.n_steps + 1] = self.Y
        Z[:self.n_steps + 1] = self.Z
        return Y, Z

    def value_at(self, s):
        """Y at time s; exactly zero beyond the terminal node."""
        k = int(round(s / self.dt)) - self.start_index
        if k < 0:
            raise ValidationError("time {!r} precedes the solution start".format(s))
        if k > self.n_steps:
            return np.zeros(self.Y.shape[1])
        return self.Y[k]


def _check_node(values, what, k):
    bad = ~np.isfinite(values.reshape(values.shape[0], -1)).all(axis=1)
    if bad.any():
        particle = int(np.argmax(bad))
        raise NumericalError("non-finite {} at node {} for particle {}".format(what, k, particle), particle=particle)


def backward_lsmc_recursion(problem, ensemble, dB, frozen_g, basis=None, sweeps=2):
    """Solve the frozen-g equation backwards from Y_N = h(X_N).

    At node k, with T_k = Y_{k+1} - sum_j g_j(t_{k+1}) dB_{k,j}:

        Z_k = E[(T_k - E[T_k | X_k]) dW_k | X_k] / dt
        Y_k = E[T_k | X_k] + dt f(t_k, X_k, Y_k, Z_k)

    the implicit f term being resolved by `sweeps` fixed-point passes started
    from the explicit value. `frozen_g` has shape (N+1, M, n), `dB` (N, n).
    """
    basis = basis or BasisSpec()
    X = ensemble.paths
    dW = ensemble.increments
    dt = ensemble.dt
    N, M, d = ensemble.n_steps, ensemble.n_particles, ensemble.dimension
    dB = np.asarray(dB, dtype=float).reshape(N, -1)
    frozen_g = np.asarray(frozen_g, dtype=float)
    if frozen_g.shape != (N + 1, M, dB.shape[1]):
        raise ValidationError("frozen g has shape {}, expected {}".format(frozen_g.shape, (N + 1, M, dB.shape[1])))

    Y = np.empty((N + 1, M))
    Z = np.zeros((N + 1, M, d))
    z_fits = [None] * (N + 1)
    reduced = False
    Y[N] = problem.eval_h(X[N])

    for k in range(N - 1, -1, -1):
        r_k = (ensemble.start_index + k) * dt
        r_next = r_k + dt
        target = Y[k + 1] - frozen_g[k + 1] @ dB[k]
        cond = regression.fit(X[k], target, basis)
        pred = cond.predict(X[k])

        z_fit = regression.fit(X[k], (target - pred)[:, None] * dW[k] / dt, basis)
        Z[k] = z_fit.predict(X[k])
        z_fits[k] = z_fit

        drift = regression.fit(X[k], problem.eval_f(r_next, X[k + 1], Y[k + 1], Z[k]), basis)
        y = pred + dt * drift.predict(X[k])
        for _ in range(sweeps):
            y = pred + dt * problem.eval_f(r_k, X[k], y, Z[k])
        _check_node(y, "Y", k)
        _check_node(Z[k], "Z", k)
        Y[k] = y
        reduced = reduced or cond.reduced or z_fit.reduced or drift.reduced

    if N > 0:
        # Z at the terminal node is not produced by the recursion.
        Z[N] = Z[N - 1]
        z_fits[N] = z_fits[N - 1]
    if reduced:
        logger.warning("regression basis reduced below degree %d on a rank-deficient design", basis.degree)
    return BackwardSolution(ensemble, Y, Z, z_fits, dB, basis, reduced)


@dataclass
class ContractionDiagnostics:
    K: float
    weight_y: float
    norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.norms)

    def to_dict(self):
        return {'K': self.K, 'weight_y': self.weight_y, 'norms': list(self.norms),
                'ratios': list(self.ratios), 'iterations': self.iterations, 'converged': self.converged}


def freeze_g(problem, ensemble, Y, Z):
    """g_j(t_k, X_k, Y_k, Z_k) on every node, shape (N+1, M, n)."""
    out = np.empty(Y.shape + (problem.n_modes,))
    for k in range(Y.shape[0]):
        r_k = (ensemble.start_index + k) * ensemble.dt
        out[k] = problem.eval_g(r_k, ensemble.paths[k], Y[k], Z[k])
    return out


def difference_norm(dY, dZ, ensemble, K, weight_y=1.0, normalizer=1.0):
    """int e^{K s} Z_rho sum_i w_i (weight_y dY^2 + |dZ|^2) ds, time measured from the start."""
    w = ensemble.weights
    per_node = weight_y * (dY ** 2 @ w) + (np.sum(dZ ** 2, axis=2) @ w)
    tau = np.arange(dY.shape[0]) * ensemble.dt
    integrand = normalizer * np.exp(K * tau) * per_node
    if dY.shape[0] == 1:
        return float(integrand[0])
    return float(integrate.trapezoid(integrand, tau))


def picard_solve(problem, ensemble, dB, max_iters=30, tol=1e-10, basis=None, sweeps=2, K=None,
                 space=None, strict=True):
    """Iterate the frozen-g map from (Y, Z) = (0, 0) until successive iterates agree.

    Returns the last iterate and its ContractionDiagnostics. The monitored
    quantity is the squared weighted norm of successive differences; when it
    stays above `tol` for `max_iters` iterations a DivergenceError carrying
    the history is raised (or, with strict=False, a warning is logged).
    """
    basis = basis or BasisSpec()
    K = picard_weight(problem) if K is None else float(K)
    weight_y = problem.sum_C / problem.sum_alpha if problem.sum_alpha > 0.0 and problem.sum_C > 0.0 else 1.0
    normalizer = space.normalizer if space is not None else 1.0
    diagnostics = ContractionDiagnostics(K, weight_y)

    N, M, d = ensemble.n_steps, ensemble.n_particles, ensemble.dimension
    Y_prev = np.zeros((N + 1, M))
    Z_prev = np.zeros((N + 1, M, d))
    frozen = freeze_g(problem, ensemble, Y_prev, Z_prev)
    solution = None

    for iteration in range(1, max_iters + 1):
        solution = backward_lsmc_recursion(problem, ensemble, dB, frozen, basis, sweeps)
        diff = difference_norm(solution.Y - Y_prev, solution.Z - Z_prev, ensemble, K, weight_y, normalizer)
        _record(diagnostics, diff)
        logger.debug("picard %d: norm=%.6e", iteration, diff)
        if not math.isfinite(diff):
            raise DivergenceError("picard iterate {} is not finite".format(iteration),
                                  history=diagnostics.norms, ratios=diagnostics.ratios)
        if diff < tol:
            diagnostics.converged = True
            break
        next_frozen = freeze_g(problem, ensemble, solution.Y, solution.Z)
        if np.array_equal(next_frozen, frozen):
            # The frozen map is constant: the next iterate repeats this one.
            _record(diagnostics, 0.0)
            diagnostics.converged = True
            break
        frozen = next_frozen
        Y_prev, Z_prev = solution.Y, solution.Z

    solution.diagnostics = diagnostics
    if diagnostics.converged:
        logger.info("picard converged after %d iterations (K=%.4g)", diagnostics.iterations, K)
    else:
        message = "picard did not converge in {} iterations (last norm {:.3e})".format(
            max_iters, diagnostics.norms[-1])
        if strict:
            raise DivergenceError(message, history=diagnostics.norms, ratios=diagnostics.ratios)
        logger.warning(message)
    return solution, diagnostics


def _record(diagnostics, value):
    if diagnostics.norms:
        previous = diagnostics.norms[-1]
        diagnostics.ratios.append(value / previous if previous > 0.0 else 0.0)
    diagnostics.norms.append(value)
