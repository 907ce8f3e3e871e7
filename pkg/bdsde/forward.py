"""Forward diffusion X_s^{t,x} over a particle ensemble.

Coefficient handles are vectorised over particles: ``drift(x)`` maps an
(M, d) array to (M, d) and ``diffusion(x)`` maps it to (M, d, d).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from bdsde import rng
from bdsde.exceptions import NumericalError, ValidationError
from bdsde.noise import ForwardDriver, grid_index

logger = logging.getLogger(__name__)

FD_STEP = 1e-4


def fd_steps(x):
    """Central difference step h = 1e-4 (1 + |x|) per point."""
    return FD_STEP * (1.0 + np.linalg.norm(x, axis=-1))


@dataclass(frozen=True)
class DiffusionConfig:
    drift: object
    diffusion: object
    dimension: int = 1
    lipschitz: float = 0.0
    name: str = "custom"

    def b(self, x):
        return np.asarray(self.drift(x), dtype=float).reshape(x.shape[0], self.dimension)

    def sigma(self, x):
        return np.asarray(self.diffusion(x), dtype=float).reshape(x.shape[0], self.dimension, self.dimension)

    def a(self, x):
        s = self.sigma(x)
        return np.einsum('mik,mjk->mij', s, s)

    def a_tilde(self, x):
        """A~_j = 1/2 sum_i d a_ij / d x_i, by central differences."""
        x = np.asarray(x, dtype=float)
        h = fd_steps(x)
        out = np.zeros_like(x)
        for i in range(self.dimension):
            step = np.zeros_like(x)
            step[:, i] = h
            da = (self.a(x + step) - self.a(x - step)) / (2.0 * h)[:, None, None]
            out += 0.5 * da[:, i, :]
        return out

    def lipschitz_probe(self, seed, n_pairs=1000, scale=5.0, bound=None):
        """Largest observed |b(x)-b(y)|/|x-y| and |sigma(x)-sigma(y)|_F/|x-y| on random pairs.

        Violations count the pairs above `bound`, by default the declared constant.
        """
        bound = self.lipschitz if bound is None else bound
        gen = rng.substream(seed, rng.PROBE, 0)
        x = scale * gen.standard_normal((n_pairs, self.dimension))
        y = scale * gen.standard_normal((n_pairs, self.dimension))
        dist = np.linalg.norm(x - y, axis=1)
        keep = dist > 1e-12
        db = np.linalg.norm(self.b(x) - self.b(y), axis=1)[keep] / dist[keep]
        ds = np.linalg.norm((self.sigma(x) - self.sigma(y)).reshape(n_pairs, -1), axis=1)[keep] / dist[keep]
        worst = float(max(db.max(initial=0.0), ds.max(initial=0.0)))
        violations = int(np.sum(db > bound * (1 + 1e-9) + 1e-12) + np.sum(ds > bound * (1 + 1e-9) + 1e-12))
        return worst, violations


@dataclass(frozen=True)
class ParticleEnsemble:
    """Forward paths started at grid index `start_index` from the points `starts`."""

    start_index: int
    dt: float
    starts: np.ndarray
    paths: np.ndarray
    increments: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n_nodes, M, d = self.paths.shape
        if self.starts.shape != (M, d):
            raise ValidationError("starts shape {} does not match paths {}".format(self.starts.shape, self.paths.shape))
        if self.increments.shape != (n_nodes - 1, M, d):
            raise ValidationError("increments shape {} does not match paths {}".format(
                self.increments.shape, self.paths.shape))
        if self.weights.shape != (M,):
            raise ValidationError("one weight per particle is required")
        for arr in (self.starts, self.paths, self.increments, self.weights):
            arr.setflags(write=False)

    @property
    def n_steps(self):
        return self.paths.shape[0] - 1

    @property
    def n_particles(self):
        return self.paths.shape[1]

    @property
    def dimension(self):
        return self.paths.shape[2]

    @property
    def start_time(self):
        return self.start_index * self.dt

    @property
    def end_index(self):
        return self.start_index + self.n_steps

    @property
    def times(self):
        return np.arange(self.start_index, self.end_index + 1) * self.dt

    def at(self, s):
        """X_s; before the start time the process is held at its starting point."""
        k = grid_index(s, self.dt)
        if k < self.start_index:
            return self.starts
        if k > self.end_index:
            raise ValidationError("time {!r} beyond the ensemble horizon {!r}".format(s, self.end_index * self.dt))
        return self.paths[k - self.start_index]

    def truncated(self, n_steps):
        """The same paths on the first `n_steps` steps."""
        if not 0 <= n_steps <= self.n_steps:
            raise ValidationError("cannot truncate {} steps to {}".format(self.n_steps, n_steps))
        return ParticleEnsemble(self.start_index, self.dt, self.starts, self.paths[:n_steps + 1],
                                self.increments[:n_steps], self.weights)


def _check_finite(values, what, k):
    bad = ~np.isfinite(values.reshape(values.shape[0], -1)).all(axis=1)
    if bad.any():
        particle = int(np.argmax(bad))
        raise NumericalError("non-finite {} at step {} for particle {}".format(what, k, particle), particle=particle)


def _euler(x0, config, dW, dt):
    paths = np.empty((dW.shape[0] + 1,) + x0.shape)
    paths[0] = x0
    x = x0
    for k in range(dW.shape[0]):
        b = config.b(x)
        s = config.sigma(x)
        _check_finite(b, "drift", k)
        _check_finite(s, "diffusion", k)
        x = x + b * dt + np.einsum('mij,mj->mi', s, dW[k])
        paths[k + 1] = x
    return paths


def euler_maruyama(t, cloud, config, driver, n_steps, driver_step=0):
    """Euler-Maruyama X_{k+1} = X_k + b(X_k) dt + sigma(X_k) dW_k started at time t.

    `cloud` is a ReferenceCloud or an (M, d) array of starting points; the
    increments are steps driver_step..driver_step+n_steps-1 of `driver`.
    """
    dt = driver.dt
    start_index = grid_index(t, dt, "start time")
    if hasattr(cloud, 'particles'):
        starts, weights = np.asarray(cloud.particles), np.asarray(cloud.weights)
    else:
        starts = np.asarray(cloud, dtype=float)
        weights = np.full(starts.shape[0], 1.0 / starts.shape[0])
    if starts.ndim != 2 or starts.shape[1] != config.dimension:
        raise ValidationError("start points must have shape (M, {})".format(config.dimension))
    if starts.shape[0] != driver.n_particles or driver.dimension != config.dimension:
        raise ValidationError("driver has {} particles in dimension {}, cloud has {} in {}".format(
            driver.n_particles, driver.dimension, starts.shape[0], config.dimension))
    dW = driver.increments(driver_step, driver_step + int(n_steps))
    paths = _euler(starts.copy(), config, dW, dt)
    logger.debug("euler: %d particles, %d steps from t=%g (%s)", starts.shape[0], n_steps, t, config.name)
    return ParticleEnsemble(start_index, dt, starts.copy(), paths, dW, weights.copy())


def flow_property_check(ensemble, r, config):
    """Restart Euler from (r, X_r) with the same increments and return max |difference| on [r, T]."""
    k = grid_index(r, ensemble.dt) - ensemble.start_index
    if not 0 <= k <= ensemble.n_steps:
        raise ValidationError("restart time {!r} outside the ensemble grid".format(r))
    restarted = _euler(np.array(ensemble.paths[k]), config, ensemble.increments[k:], ensemble.dt)
    return float(np.max(np.abs(restarted - ensemble.paths[k:]), initial=0.0))


def shift_equivariance_check(t, r, cloud, config, driver, n_steps):
    """max |X_s^{t,x}(theta_r) - X_{s+r}^{t+r,x}| over the grid.

    The left side runs from t on the driver shifted by r; the right side runs
    from t + r on the original driver, starting at its step r.
    """
    steps = grid_index(r, driver.dt, "shift offset")
    shifted = euler_maruyama(t, cloud, config, driver.shifted(steps), n_steps)
    later = euler_maruyama(t + r, cloud, config, driver, n_steps, driver_step=steps)
    return float(np.max(np.abs(shifted.paths - later.paths), initial=0.0))


@dataclass(frozen=True)
class EquivalenceEstimate:
    pushforward: float
    identity: float
    ratio: float
    ratio_se: float

    @property
    def confidence_interval(self):
        half = 1.96 * self.ratio_se
        return self.ratio - half, self.ratio + half

    def to_dict(self):
        lo, hi = self.confidence_interval
        return {'pushforward': self.pushforward, 'identity': self.identity, 'ratio': self.ratio,
                'ratio_se': self.ratio_se, 'ci_low': lo, 'ci_high': hi}


def equivalence_norm_estimate(phi, t, s, cloud, config, n_paths, seed, dt, space):
    """Estimate E int |phi(X_s^{t,x})| rho^{-1} dx against int |phi(x)| rho^{-1} dx.

    Every cloud point is replicated `n_paths` times; the per-point averages
    give a paired sample, so the ratio error comes from the delta method.
    """
    points = np.asarray(cloud.particles)
    M = points.shape[0]
    n_steps = grid_index(s - t, dt, "time lag")
    if n_steps < 0:
        raise ValidationError("s must not precede t")
    replicated = np.repeat(points, n_paths, axis=0)
    driver = ForwardDriver(dt, M * n_paths, config.dimension, seed)
    ensemble = euler_maruyama(t, replicated, config, driver, n_steps)
    moved = np.abs(np.asarray(phi(ensemble.paths[-1]), dtype=float)).reshape(M, n_paths).mean(axis=1)
    fixed = np.abs(np.asarray(phi(points), dtype=float)).reshape(M)
    a_bar, b_bar = moved.mean(), fixed.mean()
    pushforward = space.normalizer * a_bar
    identity = space.normalizer * b_bar
    if b_bar == 0.0:
        raise NumericalError("phi vanishes on the whole cloud; the ratio is undefined")
    ratio = a_bar / b_bar
    if M > 1:
        cov = np.cov(np.vstack([moved, fixed]))
        var = cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]
        se = math.sqrt(max(var, 0.0) / M) / b_bar
    else:
        se = float('inf')
    return EquivalenceEstimate(pushforward, identity, ratio, se)
