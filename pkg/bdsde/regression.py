"""Least-squares regression of targets on basis functions of the particle positions.

Two families are available: global polynomials of total degree <= k in the
standardised coordinates, and local polynomials on a uniform partition of a
box into hypercube cells (points outside the box belong to the nearest edge
cell). A rank-deficient design is refitted with a lower degree; hypercube
cells are fitted one at a time and each drops degree on its own.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from bdsde.exceptions import ValidationError
from bdsde.utils.enum import Enum, EnumValue

logger = logging.getLogger(__name__)


class BasisKind(Enum):
    POLYNOMIAL = EnumValue(0, description="global polynomials of total degree <= k")
    HYPERCUBE = EnumValue(1, description="local polynomials on uniform hypercube cells")


@dataclass(frozen=True)
class BasisSpec:
    kind: EnumValue = BasisKind.POLYNOMIAL
    degree: int = 3
    cells: int = 8
    box: float = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', BasisKind.from_string(self.kind)
                           if not isinstance(self.kind, EnumValue) else BasisKind.from_id(self.kind))
        if self.degree < 0:
            raise ValidationError("basis degree must be >= 0")
        if self.cells < 1:
            raise ValidationError("hypercube basis needs at least one cell per axis")
        if self.box is not None and not self.box > 0:
            raise ValidationError("hypercube box half-width must be positive")

    def to_dict(self):
        return {'kind': self.kind.name.lower(), 'degree': self.degree, 'cells': self.cells, 'box': self.box}


def exponents(dimension, degree):
    """Multi-indices of total degree <= degree, constant first."""
    out = [e for e in itertools.product(range(degree + 1), repeat=dimension) if sum(e) <= degree]
    return sorted(out, key=lambda e: (sum(e), tuple(-v for v in e)))


def _monomials(z, powers):
    cols = np.ones((z.shape[0], len(powers)))
    for c, e in enumerate(powers):
        for i, k in enumerate(e):
            if k:
                cols[:, c] *= z[:, i] ** k
    return cols


def _monomial_derivative(z, powers, axis):
    """d/dz_axis of every monomial."""
    cols = np.ones((z.shape[0], len(powers)))
    for c, e in enumerate(powers):
        if e[axis] == 0:
            cols[:, c] = 0.0
            continue
        for i, k in enumerate(e):
            if i == axis:
                cols[:, c] *= k * z[:, i] ** (k - 1)
            elif k:
                cols[:, c] *= z[:, i] ** k
    return cols


@dataclass(frozen=True)
class RegressionFit:
    """A fitted basis expansion.

    Polynomial fits hold one coefficient row per monomial. Hypercube fits hold
    one block of monomial coefficients per cell, shape (cells**d, n_mono, ...);
    cells without particles keep zero coefficients.
    """
    kind: EnumValue
    degree: int
    powers: tuple
    center: np.ndarray
    scale: np.ndarray
    coef: np.ndarray
    cells: int = 1
    reduced: bool = False

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == BasisKind.POLYNOMIAL:
            return _monomials((x - self.center) / self.scale, self.powers) @ self.coef
        flat, local = _locate(x, self.center, self.scale, self.cells)
        return np.einsum('mj,mj...->m...', _monomials(local, self.powers), self.coef[flat])

    def gradient(self, x):
        """Exact gradient of a scalar fit, shape (M, d)."""
        x = np.asarray(x, dtype=float)
        grad = np.empty_like(x)
        if self.kind == BasisKind.POLYNOMIAL:
            coef = self.coef.reshape(-1)
            z = (x - self.center) / self.scale
            for i in range(x.shape[1]):
                grad[:, i] = (_monomial_derivative(z, self.powers, i) / self.scale[i]) @ coef
            return grad
        flat, local = _locate(x, self.center, self.scale, self.cells)
        coef = self.coef.reshape(self.coef.shape[0], len(self.powers))[flat]
        for i in range(x.shape[1]):
            D = _monomial_derivative(local, self.powers, i) * (2.0 / self.scale[i])
            grad[:, i] = np.einsum('mj,mj->m', D, coef)
        return grad


def _locate(x, lower, width, cells):
    """Flat cell index and local coordinates in [-1, 1] of every point."""
    pos = (x - lower) / width
    index = np.clip(np.floor(pos).astype(int), 0, cells - 1)
    local = 2.0 * (pos - index) - 1.0
    return np.ravel_multi_index(tuple(index.T), (cells,) * x.shape[1]), local


def _polynomial_frame(x):
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return center, scale


def _hypercube_frame(x, spec):
    if spec.box is not None:
        lower = np.full(x.shape[1], -spec.box)
        upper = np.full(x.shape[1], spec.box)
    else:
        lower, upper = x.min(axis=0), x.max(axis=0)
    width = (upper - lower) / spec.cells
    width = np.where(width > 0.0, width, 1.0)
    return lower, width


def _fit_polynomial(x, targets, spec):
    center, scale = _polynomial_frame(x)
    z = (x - center) / scale
    degree = spec.degree
    while True:
        powers = tuple(exponents(x.shape[1], degree))
        A = _monomials(z, powers)
        coef, _, rank, _ = np.linalg.lstsq(A, targets, rcond=None)
        if rank == A.shape[1] or degree == 0:
            break
        logger.debug("design rank %d < %d columns at degree %d", rank, A.shape[1], degree)
        degree -= 1
    return RegressionFit(spec.kind, degree, powers, center, scale, coef, reduced=degree < spec.degree)


def _fit_hypercube(x, targets, spec):
    """Independent least squares in every occupied cell.

    A cell whose local design is rank deficient drops degree on its own; the
    missing high-order coefficients stay zero.
    """
    d = x.shape[1]
    center, scale = _hypercube_frame(x, spec)
    flat, local = _locate(x, center, scale, spec.cells)
    powers = tuple(exponents(d, spec.degree))
    sizes = [len(exponents(d, k)) for k in range(spec.degree + 1)]
    coef = np.zeros((spec.cells ** d, len(powers)) + targets.shape[1:])
    order = np.argsort(flat, kind='stable')
    occupied, starts = np.unique(flat[order], return_index=True)
    stops = np.append(starts[1:], order.size)
    lowest = spec.degree
    for cell, start, stop in zip(occupied, starts, stops):
        rows = order[start:stop]
        degree = spec.degree
        while True:
            A = _monomials(local[rows], powers[:sizes[degree]])
            block, _, rank, _ = np.linalg.lstsq(A, targets[rows], rcond=None)
            if rank == A.shape[1] or degree == 0:
                break
            degree -= 1
        coef[cell, :sizes[degree]] = block
        lowest = min(lowest, degree)
    if lowest < spec.degree:
        logger.debug("hypercube cells reduced down to degree %d", lowest)
    return RegressionFit(spec.kind, lowest, powers, center, scale, coef, spec.cells, reduced=lowest < spec.degree)


def fit(x, targets, spec):
    """Least-squares fit of `targets` (M,) or (M, k) on the basis evaluated at x (M, d)."""
    x = np.asarray(x, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if x.ndim != 2 or targets.shape[0] != x.shape[0]:
        raise ValidationError("regression needs x of shape (M, d) and one target row per particle")
    if spec.kind == BasisKind.POLYNOMIAL:
        return _fit_polynomial(x, targets, spec)
    return _fit_hypercube(x, targets, spec)
