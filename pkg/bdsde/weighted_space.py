"""The weight rho(x) = (1+|x|)^q, the space L^2_rho and discounted process norms.

All spatial integrals against rho^{-1}(x)dx are Monte Carlo averages over a
reference cloud drawn from the probability density rho^{-1}/Z_rho, so

    int F(x) rho^{-1}(x) dx  ~  Z_rho * sum_i w_i F(x_i).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from bdsde import rng
from bdsde.exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

SUPPORTED_DIMENSIONS = (1, 2)

# Surface measure of the unit sphere in R^d.
_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi}


def weight_normalizer(dimension, q, rtol=1e-8):
    """Z_rho = int rho^{-1}(x) dx, by adaptive quadrature of the radial integral."""
    if dimension not in _SPHERE_AREA:
        raise ConfigurationError("dimension must be one of {}, got {}".format(SUPPORTED_DIMENSIONS, dimension))
    if q <= dimension:
        raise ConfigurationError("int rho^-1 diverges for q={} <= d={}".format(q, dimension))
    radial, _ = integrate.quad(lambda r: r ** (dimension - 1) * (1.0 + r) ** (-q),
                               0.0, np.inf, epsrel=rtol, limit=200)
    value = _SPHERE_AREA[dimension] * radial
    if not np.isfinite(value) or value <= 0.0:
        raise ConfigurationError("weight normalizer is not finite and positive: {!r}".format(value))
    return value


@dataclass(frozen=True)
class WeightedSpace:
    dimension: int = 1
    q: float = 5.0
    p: float = 2.5
    normalizer: float = field(init=False, compare=False)

    def __post_init__(self):
        if self.q <= 3.0:
            raise ConfigurationError("weight exponent q must be > 3, got {}".format(self.q))
        if not 2.0 < self.p < self.q - 1.0:
            raise ConfigurationError("moment exponent p must lie in (2, q-1) = (2, {}), got {}".format(
                self.q - 1.0, self.p))
        object.__setattr__(self, 'normalizer', weight_normalizer(self.dimension, self.q))

    def weight(self, x):
        return eval_weight(x, self)

    def to_dict(self):
        return {'dimension': self.dimension, 'q': self.q, 'p': self.p}


def _as_points(x, dimension):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if dimension != 1:
            raise ValidationError("scalar point given for dimension {}".format(dimension))
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if dimension == 1 and x.shape[0] != 1:
            return x.reshape(-1, 1), False
        if x.shape[0] != dimension:
            raise ValidationError("point has {} coordinates, expected {}".format(x.shape[0], dimension))
        return x.reshape(1, dimension), True
    if x.shape[-1] != dimension:
        raise ValidationError("points have {} coordinates, expected {}".format(x.shape[-1], dimension))
    return x, False


def eval_weight(x, space):
    """rho(x) = (1+|x|)^q for a single point or an (M, d) array of points."""
    points, single = _as_points(x, space.dimension)
    value = (1.0 + np.linalg.norm(points, axis=-1)) ** space.q
    return float(value[0]) if single else value


@dataclass(frozen=True)
class ReferenceCloud:
    particles: np.ndarray
    weights: np.ndarray
    seed: int
    space: WeightedSpace

    def __post_init__(self):
        particles = np.array(self.particles, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if particles.ndim != 2 or particles.shape[1] != self.space.dimension:
            raise ValidationError("particles must have shape (M, {})".format(self.space.dimension))
        if particles.shape[0] < 1:
            raise ValidationError("a reference cloud needs at least one particle")
        if weights.shape != (particles.shape[0],):
            raise ValidationError("one weight per particle is required")
        if not math.isclose(weights.sum(), 1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValidationError("cloud weights must sum to 1, got {!r}".format(weights.sum()))
        particles.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'particles', particles)
        object.__setattr__(self, 'weights', weights)

    @property
    def size(self):
        return self.particles.shape[0]

    def __len__(self):
        return self.size


def _radius_by_inverse_cdf(u, exponent):
    # P(R > r) = (1+r)^{-exponent}
    return np.expm1(-np.log1p(-u) / exponent)


def sample_reference_cloud(M, space, seed):
    """Draw M i.i.d. points from rho^{-1}/Z_rho with uniform weights 1/M."""
    M = int(M)
    if M < 1:
        raise ValidationError("cloud size must be >= 1, got {}".format(M))
    gen = rng.substream(seed, rng.CLOUD, space.dimension)
    if space.dimension == 1:
        u = gen.random((M, 2))
        radius = _radius_by_inverse_cdf(u[:, 0], space.q - 1.0)
        points = np.where(u[:, 1] < 0.5, -radius, radius).reshape(M, 1)
    else:
        # Proposal radius has density (q-2)(1+r)^{-(q-1)}; the target radial
        # density r(1+r)^{-q} is the proposal times r/(1+r) <= 1.
        accepted = []
        n_accepted = 0
        while n_accepted < M:
            batch = max(2 * (M - n_accepted), 64)
            u = gen.random((batch, 3))
            radius = _radius_by_inverse_cdf(u[:, 0], space.q - 2.0)
            keep = u[:, 1] < radius / (1.0 + radius)
            angle = 2.0 * math.pi * u[keep, 2]
            block = np.column_stack([radius[keep] * np.cos(angle), radius[keep] * np.sin(angle)])
            accepted.append(block)
            n_accepted += block.shape[0]
        points = np.concatenate(accepted)[:M]
    logger.debug("sampled reference cloud: M=%d d=%d q=%g seed=%d", M, space.dimension, space.q, seed)
    return ReferenceCloud(points, np.full(M, 1.0 / M), int(seed), space)



def grid_reference_cloud(M, space, half_width=4.0):
    """Cell midpoints of a uniform grid on [-half_width, half_width]^d.

    Weights are proportional to rho^{-1} at the midpoints, so cloud sums are
    midpoint-rule integrals against rho^{-1} renormalised over the box. In
    two dimensions M must be a perfect square.
    """
    M = int(M)
    if M < 1:
        raise ValidationError("cloud size must be >= 1, got {}".format(M))
    if not half_width > 0:
        raise ValidationError("grid half-width must be positive")
    side = M if space.dimension == 1 else math.isqrt(M)
    if side ** space.dimension != M:
        raise ValidationError("a {}-d grid cloud needs a perfect power, got M={}".format(space.dimension, M))
    step = 2.0 * half_width / side
    axis = -half_width + step * (np.arange(side) + 0.5)
    mesh = np.meshgrid(*([axis] * space.dimension), indexing='ij')
    points = np.column_stack([m.ravel() for m in mesh])
    w = 1.0 / eval_weight(points, space)
    return ReferenceCloud(points, w / w.sum(), 0, space)


def node_norms(process, weights, space):
    """||phi(t_k)||^2_{L^2_rho} for every node of a (nodes, particles, ...) array."""
    process = np.asarray(process, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if process.ndim < 2 or process.shape[1] != weights.shape[0]:
        raise ValidationError("process must have shape (nodes, {}, ...), got {}".format(
            weights.shape[0], process.shape))
    sq = process ** 2
    if sq.ndim > 2:
        sq = sq.reshape(sq.shape[0], sq.shape[1], -1).sum(axis=-1)
    return space.normalizer * (sq @ weights)


def weighted_l2_norm(field, cloud, space):
    """Monte Carlo estimate of ||field||_{L^2_rho}."""
    field = np.asarray(field, dtype=float)
    if field.ndim == 0 or field.shape[0] != len(cloud.weights):
        raise ValidationError("field has {} values but the cloud has {} particles".format(
            0 if field.ndim == 0 else field.shape[0], len(cloud.weights)))
    if field.ndim == 1:
        sq = field ** 2
    else:
        sq = np.sum(field.reshape(field.shape[0], -1) ** 2, axis=1)
    return math.sqrt(space.normalizer * float(np.dot(cloud.weights, sq)))


@dataclass(frozen=True)
class DiscountedNormSpec:
    K: float
    times: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if not self.K > 0.0:
            raise ValidationError("discount rate K must be > 0, got {}".format(self.K))
        if times.ndim != 1 or times.size < 1:
            raise ValidationError("time grid must be a non-empty 1-d array")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise ValidationError("time grid nodes must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)

    def discounts(self):
        return np.exp(-self.K * self.times)


def _node_norms(process, spec, cloud, space):
    process = np.asarray(process, dtype=float)
    if process.ndim == 0 or process.shape[0] != spec.times.size:
        raise ValidationError("process has {} nodes but the grid has {}".format(
            0 if process.ndim == 0 else process.shape[0], spec.times.size))
    return node_norms(process, cloud.weights, space)


def discounted_l2_process_norm(process, spec, cloud, space):
    """Trapezoidal int e^{-Ks} ||phi(s)||^2_{L^2_rho} ds over the grid."""
    integrand = spec.discounts() * _node_norms(process, spec, cloud, space)
    if spec.times.size == 1:
        return 0.0
    return float(integrate.trapezoid(integrand, spec.times))


def discounted_sup_norm(process, spec, cloud, space):
    """max over grid nodes of e^{-Ks} ||psi(s)||^2_{L^2_rho}."""
    return float(np.max(spec.discounts() * _node_norms(process, spec, cloud, space)))


def unit_time_increments(process, spec, cloud, space):
    """Discounted integral over each whole unit of time covered by the grid."""
    integrand = spec.discounts() * _node_norms(process, spec, cloud, space)
    t0 = spec.times[0]
    increments = []
    n = 0
    while t0 + n + 1 <= spec.times[-1] + 1e-12:
        mask = (spec.times >= t0 + n - 1e-12) & (spec.times <= t0 + n + 1 + 1e-12)
        increments.append(float(integrate.trapezoid(integrand[mask], spec.times[mask])))
        n += 1
    return increments


def discounted_norm_diverges(process, spec, cloud, space):
    """True when the per-unit-time increments of the discounted integral stop decreasing."""
    increments = unit_time_increments(process, spec, cloud, space)
    if len(increments) < 2:
        return False
    last, previous = increments[-1], increments[-2]
    if previous == 0.0 and last == 0.0:
        return False
    diverges = last >= previous * (1.0 - 1e-9)
    if diverges:
        logger.warning("discounted norm increments stopped decreasing: %.6g -> %.6g", previous, last)
    return diverges
