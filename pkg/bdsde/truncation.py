"""C^1 truncations of x^2 and x^{p/2} used to localise moment estimates."""

import numpy as np

from bdsde.exceptions import DomainError, ValidationError


def _positive(name, value):
    if not value > 0:
        raise ValidationError("{} must be positive, got {!r}".format(name, value))


def psi_M(x, M):
    """x^2 on [-M, M), continued linearly with slope +-2M outside."""
    _positive("M", M)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= M, M * (2.0 * x - M), np.where(x < -M, -M * (2.0 * x + M), x * x))
    return out[()] if out.ndim == 0 else out


def psi_M_prime(x, M):
    _positive("M", M)
    x = np.asarray(x, dtype=float)
    out = np.clip(2.0 * x, -2.0 * M, 2.0 * M)
    return out[()] if out.ndim == 0 else out


def _check_phi_args(x, N, p):
    _positive("N", N)
    if not p > 2:
        raise ValidationError("p must exceed 2, got {!r}".format(p))
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("phi_Np is defined for x >= 0 only")
    return x


def phi_Np(x, N, p):
    """x^{p/2} on [0, N), continued by its tangent line at N."""
    x = _check_phi_args(x, N, p)
    tail = N ** ((p - 2.0) / 2.0) * (p / 2.0 * x - (p - 2.0) / 2.0 * N)
    out = np.where(x < N, x ** (p / 2.0), tail)
    return out[()] if out.ndim == 0 else out


def phi_Np_prime(x, N, p):
    x = _check_phi_args(x, N, p)
    out = np.where(x < N, p / 2.0 * x ** ((p - 2.0) / 2.0), p / 2.0 * N ** ((p - 2.0) / 2.0))
    return out[()] if out.ndim == 0 else out
