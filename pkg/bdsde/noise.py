"""Truncated cylindrical Brownian driver, forward driver W and the shift/reversal algebra.

Paths live on an integer step grid: the node with index k sits at time k*dt,
so grid alignment and span checks are exact integer arithmetic.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from bdsde import rng
from bdsde.exceptions import SpanError, ValidationError

logger = logging.getLogger(__name__)

# Side keys for the two halves of a two-sided path.
_FUTURE = 0
_PAST = 1


def grid_index(t, dt, what="time"):
    """Index of `t` on the grid of step `dt`; raises ValidationError off the grid."""
    ratio = float(t) / dt
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9 * max(1.0, abs(ratio)):
        raise ValidationError("{} {!r} is not a multiple of dt={!r}".format(what, t, dt))
    return k


@dataclass(frozen=True)
class NoiseModel:
    eigenvalues: tuple
    dimension: int = 1

    def __post_init__(self):
        eigenvalues = tuple(float(v) for v in self.eigenvalues)
        if len(eigenvalues) < 1:
            raise ValidationError("the noise needs at least one mode")
        if any(v < 0.0 or not math.isfinite(v) for v in eigenvalues):
            raise ValidationError("eigenvalues must be finite and non-negative: {}".format(eigenvalues))
        if self.dimension < 1:
            raise ValidationError("forward driver dimension must be >= 1")
        object.__setattr__(self, 'eigenvalues', eigenvalues)

    @property
    def n_modes(self):
        return len(self.eigenvalues)

    def to_dict(self):
        return {'eigenvalues': list(self.eigenvalues), 'dimension': self.dimension}


@dataclass(frozen=True)
class TwoSidedPath:
    """Values of the n-mode path at times (start_index + k) * dt, k = 0..len-1."""

    dt: float
    start_index: int
    values: np.ndarray
    seed: int = 0
    path_id: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValidationError("path values must have shape (nodes, modes)")
        if not self.dt > 0.0:
            raise ValidationError("dt must be positive")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'start_index', int(self.start_index))

    @property
    def n_modes(self):
        return self.values.shape[1]

    @property
    def end_index(self):
        return self.start_index + self.values.shape[0] - 1

    @property
    def span(self):
        return self.start_index * self.dt, self.end_index * self.dt

    @property
    def times(self):
        return np.arange(self.start_index, self.end_index + 1) * self.dt

    def position(self, t):
        """Array row holding time `t`."""
        k = grid_index(t, self.dt)
        if not self.start_index <= k <= self.end_index:
            raise SpanError("time {!r} outside path span [{!r}, {!r}]".format(t, *self.span))
        return k - self.start_index

    def at(self, t):
        return self.values[self.position(t)]

    def increments(self, s, T):
        """Per-step increments B(t_{i+1}) - B(t_i) on [s, T], shape (steps, modes)."""
        i0, i1 = self.position(s), self.position(T)
        if i1 < i0:
            raise ValidationError("window end {!r} precedes start {!r}".format(T, s))
        return np.diff(self.values[i0:i1 + 1], axis=0)


@dataclass(frozen=True)
class ShiftOp:
    offset: float


def _one_side(seed, path_id, mode, side, n_steps, scale):
    if n_steps == 0 or scale == 0.0:
        return np.zeros(n_steps)
    return rng.normal_block(seed, rng.BACKWARD, (path_id, mode, side), n_steps, scale)


def sample_two_sided(model, dt, span, seed, path_id=0):
    """Two-sided path on [-span, span] with B(0) = 0 exactly.

    The future and past halves of each mode come from their own substreams,
    so a longer span extends a path without changing the part already drawn.
    """
    n_steps = grid_index(span, dt, "span")
    if n_steps < 0:
        raise ValidationError("span must be non-negative")
    values = np.zeros((2 * n_steps + 1, model.n_modes))
    for j, lam in enumerate(model.eigenvalues):
        scale = math.sqrt(lam * dt)
        future = _one_side(seed, path_id, j, _FUTURE, n_steps, scale)
        past = _one_side(seed, path_id, j, _PAST, n_steps, scale)
        values[n_steps + 1:, j] = np.cumsum(future)
        values[:n_steps, j] = -np.cumsum(past)[::-1]
    return TwoSidedPath(dt, -n_steps, values, int(seed), int(path_id))


class ForwardDriver(object):
    """Brownian increments dW for M particles, indexed by step from the driver origin.

    Component c of replica `path_id` is one substream of shape (steps, M);
    ``shifted(r)`` re-indexes the same numbers, which is how the driver-shift
    protocol of the forward flow is realised.
    """

    def __init__(self, dt, n_particles, dimension=1, seed=0, path_id=0, offset=0):
        if not dt > 0.0:
            raise ValidationError("dt must be positive")
        if n_particles < 1:
            raise ValidationError("a forward driver needs at least one particle")
        self.dt = float(dt)
        self.n_particles = int(n_particles)
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.path_id = int(path_id)
        self.offset = int(offset)
        self._cache = np.zeros((0, self.n_particles, self.dimension))

    def _ensure(self, n_rows):
        if n_rows <= self._cache.shape[0]:
            return
        block = np.empty((n_rows, self.n_particles, self.dimension))
        scale = math.sqrt(self.dt)
        for c in range(self.dimension):
            gen = rng.substream(self.seed, rng.FORWARD, self.path_id, c)
            block[:, :, c] = scale * gen.standard_normal((n_rows, self.n_particles))
        self._cache = block

    def increments(self, k0, k1):
        """Increments for steps k0..k1-1 of this driver, shape (k1-k0, M, d)."""
        a, b = k0 + self.offset, k1 + self.offset
        if a < 0 or b < a:
            raise SpanError("forward increments requested for steps [{}, {})".format(k0, k1))
        self._ensure(b)
        return self._cache[a:b].copy()

    def shifted(self, steps):
        return ForwardDriver(self.dt, self.n_particles, self.dimension, self.seed, self.path_id,
                             self.offset + int(steps))


def sample_paths(model, dt, span, seed, n_particles, path_id=0):
    """The forward driver W and the two-sided backward driver B for one replica.

    The two draw from disjoint substreams and are therefore independent.
    """
    driver = ForwardDriver(dt, n_particles, model.dimension, seed, path_id)
    path = sample_two_sided(model, dt, span, seed, path_id)
    logger.debug("sampled replica %d: %d modes on [-%g, %g]", path_id, model.n_modes, span, span)
    return driver, path


def time_reverse(path, Tprime):
    """B'_s = B_{T'-s} - B_{T'}; a pure re-indexing of the stored values."""
    anchor = path.position(Tprime)
    k_anchor = path.start_index + anchor
    values = path.values[::-1] - path.values[anchor]
    return TwoSidedPath(path.dt, k_anchor - path.end_index, values, path.seed, path.path_id)


def shift(path, op):
    """(theta_r B)_s = B_{s+r} - B_r."""
    if not isinstance(op, ShiftOp):
        op = ShiftOp(op)
    r = grid_index(op.offset, path.dt, "shift offset")
    anchor = path.position(r * path.dt)
    values = path.values - path.values[anchor]
    return TwoSidedPath(path.dt, path.start_index - r, values, path.seed, path.path_id)


def _integrand(h, n_steps):
    h = np.asarray(h, dtype=float)
    if h.shape[0] != n_steps + 1:
        raise ValidationError("integrand has {} nodes, the window has {}".format(h.shape[0], n_steps + 1))
    return h


def backward_integral(h, path, s, T, mode=0):
    """Right-endpoint sum sum_i h(t_{i+1}) (B(t_{i+1}) - B(t_i)) over [s, T]."""
    dB = path.increments(s, T)[:, mode]
    h = _integrand(h, dB.shape[0])
    return float(np.dot(h[1:], dB))


def forward_integral(h, path, s, T, mode=0):
    """Left-endpoint (Ito) sum sum_i h(t_i) (B(t_{i+1}) - B(t_i)) over [s, T]."""
    dB = path.increments(s, T)[:, mode]
    h = _integrand(h, dB.shape[0])
    return float(np.dot(h[:-1], dB))
