"""From BDSDE solutions to the SPDE: the field u(t, x) = Y_t^{t,x}, the weak form and Z = sigma* grad u.

Lebesgue integrals over R^d are importance-sampled on the reference cloud,

    int F(x) dx  ~  Z_rho * sum_i w_i rho(x_i) F(x_i),

and the weak form is checked as

    int u(t) phi - int u(T) phi + 1/2 int int (sigma* grad u)(sigma* grad phi)
        + int int u div((b - A~) phi)  =  int int f phi - sum_j int int g_j phi d^dagger beta_j,

the time integrals being trapezoidal sums and the backward integral a
right-endpoint sum.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from bdsde import rng
from bdsde.exceptions import UsageError, ValidationError
from bdsde.forward import fd_steps
from bdsde.noise import grid_index
from bdsde.weighted_space import eval_weight

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FieldSnapshot:
    time: float
    particles: np.ndarray
    u: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        if self.u.shape[0] != self.particles.shape[0]:
            raise ValidationError("field values do not match the cloud")
        if not np.all(np.isfinite(self.u)):
            raise ValidationError("field values must be finite")


def extract_field(solution, t):
    """u(t, .) = Y_t^{t, .} and sigma* grad u = Z_t^{t, .} read off the start node of `solution`."""
    k = grid_index(t, solution.dt)
    if k != solution.start_index:
        raise UsageError("the ensemble starts at {!r}; u({!r}, .) needs an ensemble started at {!r}".format(
            solution.start_index * solution.dt, t, t))
    return FieldSnapshot(t, solution.ensemble.starts, solution.Y[0], solution.Z[0])


@dataclass(frozen=True)
class TestFunction:
    """Smooth bump exp(-1/(1 - |x-c|^2/w^2)) supported in the ball of radius w around c."""

    center: tuple
    radius: float
    name: str = ""

    def _s(self, x):
        c = np.asarray(self.center, dtype=float)
        return np.sum((np.asarray(x, dtype=float) - c) ** 2, axis=-1) / self.radius ** 2

    def __call__(self, x):
        s = self._s(x)
        inside = s < 1.0
        gap = np.where(inside, 1.0 - s, 1.0)
        return np.where(inside, np.exp(-1.0 / gap), 0.0)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        s = self._s(x)
        inside = s < 1.0
        gap = np.where(inside, 1.0 - s, 1.0)
        value = np.where(inside, np.exp(-1.0 / gap), 0.0)
        factor = -value / gap ** 2 * 2.0 / self.radius ** 2
        return factor[:, None] * (x - np.asarray(self.center, dtype=float))

    def support_probe(self, n=100, seed=0):
        """max |phi| over n points at distance in [w, 2w] from the centre."""
        gen = rng.substream(seed, rng.PROBE, 3)
        d = len(self.center)
        direction = gen.standard_normal((n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        points = np.asarray(self.center) + self.radius * (1.0 + gen.random(n))[:, None] * direction
        return float(np.max(np.abs(self(points))))


def bump_family(dimension=1, centers=(-1.0, 0.0, 1.0), widths=(0.5, 1.0)):
    """Bumps at every centre (along the first axis) and width."""
    family = []
    for w in widths:
        for c in centers:
            center = (c,) + (0.0,) * (dimension - 1)
            family.append(TestFunction(center, w, "bump(c={:g},w={:g})".format(c, w)))
    return tuple(family)


def _fd_gradient(fn, x):
    h = fd_steps(x)
    grad = np.empty_like(x)
    for i in range(x.shape[1]):
        step = np.zeros_like(x)
        step[:, i] = h
        grad[:, i] = (np.asarray(fn(x + step), dtype=float) - np.asarray(fn(x - step), dtype=float)) / (2.0 * h)
    return grad


def _divergence(field, x):
    h = fd_steps(x)
    div = np.zeros(x.shape[0])
    for i in range(x.shape[1]):
        step = np.zeros_like(x)
        step[:, i] = h
        div += (field(x + step)[:, i] - field(x - step)[:, i]) / (2.0 * h)
    return div


def _sigma_star(diffusion, x, v):
    return np.einsum('mji,mj->mi', diffusion.sigma(x), v)


@dataclass(frozen=True)
class FieldHistory:
    """u, sigma* grad u and the coefficients evaluated along the start points at every node."""
    u: np.ndarray
    sigma_grad_u: np.ndarray
    f: np.ndarray
    g: np.ndarray


def field_history(solution, problem):
    """Evaluate the fitted field once per node; shared by every test function."""
    x = np.asarray(solution.ensemble.starts)
    dt = solution.dt
    N = solution.n_steps
    diffusion = problem.diffusion
    M = x.shape[0]
    u = np.empty((N + 1, M))
    sigma_grad_u = np.empty((N + 1, M, x.shape[1]))
    f = np.empty((N + 1, M))
    g = np.empty((N + 1, M, problem.n_modes))
    for k in range(N + 1):
        r_k = (solution.start_index + k) * dt
        if k == 0:
            u[k] = solution.Y[0]
        elif k == N:
            u[k] = problem.eval_h(x)
        else:
            u[k] = solution.y_fit(k).predict(x)
        grad_u = _fd_gradient(problem.eval_h, x) if k == N else solution.y_fit(k).gradient(x)
        sigma_grad_u[k] = _sigma_star(diffusion, x, grad_u)
        f[k] = problem.eval_f(r_k, x, u[k], sigma_grad_u[k])
        g[k] = problem.eval_g(r_k, x, u[k], sigma_grad_u[k])
    return FieldHistory(u, sigma_grad_u, f, g)


def weak_residual_terms(solution, problem, phi, space, history=None):
    """The five integrals of the weak form on [t, T], keyed 'u', 'grad', 'div', 'f', 'g'."""
    x = np.asarray(solution.ensemble.starts)
    dt = solution.dt
    N = solution.n_steps
    lebesgue_weights = space.normalizer * solution.ensemble.weights * eval_weight(x, space)
    diffusion = problem.diffusion
    if history is None:
        history = field_history(solution, problem)

    phi_x = phi(x)
    sigma_grad_phi = _sigma_star(diffusion, x, phi.gradient(x))
    transport = lambda y: (diffusion.b(y) - diffusion.a_tilde(y)) * phi(y)[:, None]
    div_term = _divergence(transport, x)

    grad_t = np.einsum('m,kmi,mi->k', lebesgue_weights, history.sigma_grad_u, sigma_grad_phi)
    div_t = history.u @ (lebesgue_weights * div_term)
    f_t = history.f @ (lebesgue_weights * phi_x)
    g_t = np.einsum('m,kmj->kj', lebesgue_weights * phi_x, history.g)

    times = np.arange(N + 1) * dt
    trap = (lambda v: float(integrate.trapezoid(v, times))) if N > 0 else (lambda v: 0.0)
    u_t = float(lebesgue_weights @ (solution.Y[0] * phi_x))
    u_T = float(lebesgue_weights @ (history.u[N] * phi_x))
    dB = np.asarray(solution.backward_increments).reshape(N, -1)
    return {
        'u': u_t - u_T,
        'grad': 0.5 * trap(grad_t),
        'div': trap(div_t),
        'f': trap(f_t),
        'g': float(np.sum(g_t[1:] * dB)),
        'scale': float(lebesgue_weights @ np.abs(solution.Y[0] * phi_x)),
    }


def residual_of(terms):
    """(|LHS - RHS|, largest term magnitude) of a weak-form term dict."""
    lhs = terms['u'] + terms['grad'] + terms['div']
    rhs = terms['f'] - terms['g']
    normalizer = max(abs(terms[k]) for k in ('u', 'grad', 'div', 'f', 'g', 'scale'))
    return abs(lhs - rhs), normalizer


def weak_residual(solution, problem, phi, space, history=None):
    """|LHS - RHS| of the weak form divided by the largest term magnitude."""
    gap, normalizer = residual_of(weak_residual_terms(solution, problem, phi, space, history))
    if normalizer == 0.0:
        return 0.0
    return gap / max(normalizer, 1e-300)


def gradient_representation_check(solution, diffusion, space):
    """Time-averaged L^2_rho norm of Z_k - sigma*(X_k) grad u_k(X_k) over nodes k < N.

    grad u_k is the exact gradient of the regression interpolant of the
    node-k values.
    """
    N = solution.n_steps
    if N == 0:
        return 0.0
    weights = solution.ensemble.weights
    total = 0.0
    for k in range(N):
        X = solution.ensemble.paths[k]
        gap = solution.Z[k] - _sigma_star(diffusion, X, solution.y_fit(k).gradient(X))
        total += space.normalizer * float(weights @ np.sum(gap ** 2, axis=1))
    value = math.sqrt(total / N)
    logger.debug("gradient representation discrepancy %.4e over %d nodes", value, N)
    return value
