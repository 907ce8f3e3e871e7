"""BDSDE problem definition: coefficient handles plus structural constants.

Coefficients are vectorised over particles. With r a time, x of shape (M, d),
y of shape (M,) and z of shape (M, d):

    f(r, x, y, z) -> (M,)        g_j(r, x, y, z) -> (M,)        h(x) -> (M,)

The backward noise enters the equation with a minus sign,

    Y_s = h(X_T) + int_s^T f dr - sum_j int_s^T g_j d^dagger beta_j - int_s^T Z dW.
"""

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from bdsde.exceptions import NumericalError, ValidationError

logger = logging.getLogger(__name__)


def zero_terminal(x):
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class BDSDEProblem:
    """A BDSDE on [0, horizon], or on [0, infinity) when `horizon` is None.

    `mu` is read with the sign of the horizon: on a finite horizon
    (y1-y2)(f(y1)-f(y2)) <= mu (y1-y2)^2; on an infinite horizon the bound is
    -mu (y1-y2)^2 with mu > 0. `L` bounds the Lipschitz constants of b and
    sigma; it defaults to the diffusion's own and may only be raised.
    """

    name: str
    f: object
    g: tuple
    h: object
    diffusion: object
    noise: object
    mu: float = 0.0
    C: float = 0.0
    C_j: tuple = ()
    alpha: tuple = ()
    M_j: tuple = ()
    M: float = 0.0
    M0: float = 1.0
    L: float = None
    horizon: float = None
    K: float = None
    description: str = ""
    oracle: str = None
    terminal_measurable: bool = True
    autonomous: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.noise.n_modes
        g = tuple(self.g)
        if len(g) != n:
            raise ValidationError("{} noise coefficients given for {} modes".format(len(g), n))
        object.__setattr__(self, 'g', g)
        for name in ('C_j', 'alpha', 'M_j'):
            values = tuple(float(v) for v in (getattr(self, name) or (0.0,) * n))
            if len(values) != n:
                raise ValidationError("{} has {} entries for {} modes".format(name, len(values), n))
            if any(v < 0.0 for v in values):
                raise ValidationError("{} entries must be non-negative".format(name))
            object.__setattr__(self, name, values)
        if self.horizon is not None and self.horizon < 0:
            raise ValidationError("horizon must be non-negative")
        if self.diffusion.dimension != self.noise.dimension:
            raise ValidationError("diffusion dimension {} differs from the forward driver dimension {}".format(
                self.diffusion.dimension, self.noise.dimension))
        if self.L is None:
            object.__setattr__(self, 'L', float(self.diffusion.lipschitz))
        elif self.L < self.diffusion.lipschitz:
            raise ValidationError("L={} is below the Lipschitz constant {} of the {} diffusion".format(
                self.L, self.diffusion.lipschitz, self.diffusion.name))

    @property
    def n_modes(self):
        return self.noise.n_modes

    @property
    def dimension(self):
        return self.diffusion.dimension

    @property
    def infinite(self):
        return self.horizon is None

    @property
    def sum_alpha(self):
        return float(sum(self.alpha))

    @property
    def sum_C(self):
        return float(sum(self.C_j))

    @property
    def finite_mu(self):
        """Monotonicity constant in the finite-horizon sign convention."""
        return -self.mu if self.infinite else self.mu

    def eval_f(self, r, x, y, z):
        out = np.asarray(self.f(r, x, y, z), dtype=float)
        out = np.broadcast_to(out, (x.shape[0],))
        _require_finite(out, "f", r)
        return out

    def eval_g(self, r, x, y, z):
        """All noise coefficients at once, shape (M, n)."""
        out = np.empty((x.shape[0], self.n_modes))
        for j, g_j in enumerate(self.g):
            out[:, j] = np.broadcast_to(np.asarray(g_j(r, x, y, z), dtype=float), (x.shape[0],))
        _require_finite(out, "g", r)
        return out

    def eval_h(self, x):
        out = np.broadcast_to(np.asarray(self.h(x), dtype=float), (x.shape[0],)).copy()
        _require_finite(out, "h", None)
        return out

    def with_terminal(self, h):
        return dataclasses.replace(self, h=h)

    def with_horizon(self, horizon):
        return dataclasses.replace(self, horizon=horizon)

    def rung(self, horizon):
        """Finite-horizon problem with zero terminal data at `horizon`."""
        return dataclasses.replace(self, h=zero_terminal, horizon=horizon, mu=self.finite_mu)

    def constants(self):
        return {
            'mu': self.mu, 'C': self.C, 'C_j': list(self.C_j), 'alpha': list(self.alpha),
            'M_j': list(self.M_j), 'M': self.M, 'M0': self.M0, 'L': self.L,
            'horizon': self.horizon, 'K': self.K,
        }


def _require_finite(values, what, r):
    flat = values.reshape(values.shape[0], -1)
    bad = ~np.isfinite(flat).all(axis=1)
    if bad.any():
        particle = int(np.argmax(bad))
        raise NumericalError("{} is not finite at r={!r} for particle {}".format(what, r, particle),
                             particle=particle)
