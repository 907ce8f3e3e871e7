"""Built-in problems and diffusions, selectable by name from a config file.

Every builder takes keyword parameters with defaults, so a problem is fully
described by its name plus a flat parameter dict.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from bdsde.exceptions import ConfigurationError
from bdsde.forward import DiffusionConfig
from bdsde.noise import NoiseModel
from bdsde.problem import BDSDEProblem, zero_terminal

logger = logging.getLogger(__name__)


def _zeros_vector(x):
    return np.zeros_like(x)


def _zeros_matrix(x):
    return np.zeros(x.shape + (x.shape[1],))


def _identity_matrix(x):
    return np.broadcast_to(np.eye(x.shape[1]), x.shape + (x.shape[1],)).copy()


def zero_diffusion(dimension=1):
    return DiffusionConfig(_zeros_vector, _zeros_matrix, dimension, 0.0, "zero")


def constant_drift_diffusion(dimension=1, speed=1.0):
    return DiffusionConfig(lambda x: np.full_like(x, speed), _zeros_matrix, dimension, 0.0, "constant_drift")


def ou_diffusion(dimension=1, theta=1.0):
    return DiffusionConfig(lambda x: -theta * x, _identity_matrix, dimension, float(theta), "ou")


def linear_sigma_diffusion(dimension=1, scale=0.5):
    def sigma(x):
        out = np.zeros(x.shape + (x.shape[1],))
        idx = np.arange(x.shape[1])
        out[:, idx, idx] = scale * x
        return out
    return DiffusionConfig(_zeros_vector, sigma, dimension, float(scale), "linear_sigma")


def brownian_diffusion(dimension=1):
    return DiffusionConfig(_zeros_vector, _identity_matrix, dimension, 0.0, "brownian")


DIFFUSIONS = {
    'zero': zero_diffusion,
    'constant_drift': constant_drift_diffusion,
    'ou': ou_diffusion,
    'linear_sigma': linear_sigma_diffusion,
    'brownian': brownian_diffusion,
}


def get_diffusion(name, dimension=1):
    try:
        return DIFFUSIONS[name](dimension)
    except KeyError:
        raise ConfigurationError("unknown diffusion {!r}; known: {}".format(name, ", ".join(sorted(DIFFUSIONS))))


def _constant(value):
    return lambda r, x, y, z: np.full(x.shape[0], float(value))


def _zero_g(r, x, y, z):
    return np.zeros(x.shape[0])


def _gaussian_bump(x):
    return np.exp(-np.sum(x ** 2, axis=1))


# Oracles


def ode_oracle(t, T, mu=1.0, c=1.0):
    """Y_t of y' = mu y - c backwards from Y_T = 0: c/mu (1 - e^{-mu (T-t)})."""
    return c / mu * (1.0 - np.exp(-mu * (T - np.asarray(t, dtype=float))))


def ou_stationary_moments(mu=1.0, c=1.0, beta=0.5):
    """Mean c/mu and variance beta^2/(2 mu) of v = c/mu + beta int e^{-mu(t-r)} dB_r."""
    return c / mu, beta ** 2 / (2.0 * mu)


def heat_bump_oracle(t, x, T, mu=1.0):
    """e^{-mu tau} (1+2 tau)^{-d/2} exp(-|x|^2/(1+2 tau)) with tau = T - t, the bump pushed by the heat flow."""
    x = np.asarray(x, dtype=float)
    tau = T - t
    spread = 1.0 + 2.0 * tau
    return math.exp(-mu * tau) * spread ** (-x.shape[1] / 2.0) * np.exp(-np.sum(x ** 2, axis=1) / spread)


def gaussian_abs_moment(mean, variance, p):
    """E|N(mean, variance)|^p by quadrature."""
    if variance == 0.0:
        return abs(mean) ** p
    sd = math.sqrt(variance)
    density = lambda v: math.exp(-0.5 * ((v - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
    value, _ = integrate.quad(lambda v: abs(v) ** p * density(v), -np.inf, np.inf, epsabs=1e-12, limit=200)
    return value


# Problems


def zero(dimension=1, eigenvalues=(1.0,), diffusion='brownian', horizon=None):
    return BDSDEProblem(
        "zero", lambda r, x, y, z: -y, (_zero_g,) * len(eigenvalues), zero_terminal,
        get_diffusion(diffusion, dimension), NoiseModel(eigenvalues, dimension),
        mu=1.0 if horizon is None else -1.0, M0=1.0, horizon=horizon,
        description="f = -y, g = 0, h = 0; the solution and every residual vanish identically",
        oracle="Y = 0, Z = 0",
        params={'dimension': dimension, 'eigenvalues': list(eigenvalues), 'diffusion': diffusion, 'horizon': horizon})


def constant_drift_f(c=1.0, speed=1.0, dimension=1, horizon=1.0):
    diffusion = constant_drift_diffusion(dimension, speed)
    return BDSDEProblem(
        "constant_drift_f", _constant(c), (_zero_g,), lambda x: x[:, 0],
        diffusion, NoiseModel((1.0,), dimension),
        mu=0.0, M0=max(abs(c), 1.0), horizon=horizon,
        description="f = c, g = 0, h(x) = x_1 under the drift X' = speed",
        oracle="Y_t(x) = x_1 + (speed + c)(T - t)",
        params={'c': c, 'speed': speed, 'dimension': dimension, 'horizon': horizon})


def monotone_ode(mu=1.0, c=1.0, dimension=1, horizon=None):
    return BDSDEProblem(
        "monotone_ode", lambda r, x, y, z: -mu * y + c, (_zero_g,), zero_terminal,
        zero_diffusion(dimension), NoiseModel((1.0,), dimension),
        mu=mu if horizon is None else -mu, M0=max(mu, abs(c)), horizon=horizon,
        description="f = -mu y + c, g = 0, h = 0, X = x",
        oracle="Y_t = c/mu (1 - exp(-mu (T - t))); infinite horizon c/mu",
        params={'mu': mu, 'c': c, 'dimension': dimension, 'horizon': horizon})


def ou_additive(mu=1.0, c=1.0, beta=0.5, dimension=1, horizon=None):
    return BDSDEProblem(
        "ou_additive", lambda r, x, y, z: -mu * y + c, (_constant(beta),), zero_terminal,
        zero_diffusion(dimension), NoiseModel((1.0,), dimension),
        mu=mu if horizon is None else -mu, M0=max(mu, abs(c)), horizon=horizon,
        description="f = -mu y + c, g = beta, sigma = 0, b = 0: a scalar OU field",
        oracle="v_t ~ N(c/mu, beta^2/(2 mu)); v_t = c/mu + beta int_{-inf}^t exp(-mu (t - r)) dB_r",
        params={'mu': mu, 'c': c, 'beta': beta, 'dimension': dimension, 'horizon': horizon})


def heat_bump(mu=1.0, c=0.0, beta=0.0, dimension=1, horizon=1.0):
    g = _constant(beta) if beta else _zero_g
    return BDSDEProblem(
        "heat_bump", lambda r, x, y, z: -mu * y + c, (g,), _gaussian_bump,
        brownian_diffusion(dimension), NoiseModel((1.0,), dimension),
        mu=mu if horizon is None else -mu, M0=max(mu, abs(c), 1.0), horizon=horizon,
        description="heat flow (b = 0, sigma = I) with f = -mu y + c, g = beta and h(x) = exp(-|x|^2)",
        oracle="for c = beta = 0: u(t, x) = exp(-mu tau) (1 + 2 tau)^(-d/2) exp(-|x|^2/(1 + 2 tau)), tau = T - t",
        params={'mu': mu, 'c': c, 'beta': beta, 'dimension': dimension, 'horizon': horizon})


def linear_g(alpha=0.3, gamma=0.0, mu=1.0, dimension=1, horizon=1.0):
    kappa = math.sqrt(alpha / 2.0)

    def g(r, x, y, z):
        return gamma * y + kappa * z[:, 0]

    return BDSDEProblem(
        "linear_g", lambda r, x, y, z: -mu * y, (g,), lambda x: np.sin(x[:, 0]),
        brownian_diffusion(dimension), NoiseModel((1.0,), dimension),
        mu=mu if horizon is None else -mu, C_j=(2.0 * gamma ** 2,), alpha=(alpha,), M0=mu, horizon=horizon,
        description="g = gamma y + kappa z_1 with kappa^2 = alpha/2, f = -mu y, h = sin(x_1)",
        oracle="Picard contraction factor 2 sum(alpha_j)",
        params={'alpha': alpha, 'gamma': gamma, 'mu': mu, 'dimension': dimension, 'horizon': horizon})


def linear_terminal(slope=1.0, dimension=1, horizon=1.0):
    return BDSDEProblem(
        "linear_terminal", lambda r, x, y, z: np.zeros(x.shape[0]), (_zero_g,), lambda x: slope * x[:, 0],
        brownian_diffusion(dimension), NoiseModel((1.0,), dimension),
        mu=0.0, M0=1.0, horizon=horizon,
        description="h(x) = a x_1 under Brownian motion with f = g = 0",
        oracle="u(t, x) = a x_1 and Z = sigma* grad u = a e_1",
        params={'slope': slope, 'dimension': dimension, 'horizon': horizon})


def ou_diffusion_problem(mu=1.0, theta=1.0, dimension=1, horizon=1.0):
    return BDSDEProblem(
        "ou_diffusion", lambda r, x, y, z: -mu * y, (_zero_g,), _gaussian_bump,
        ou_diffusion(dimension, theta), NoiseModel((1.0,), dimension),
        mu=mu if horizon is None else -mu, M0=mu, horizon=horizon,
        description="OU forward flow with f = -mu y, g = 0, h(x) = exp(-|x|^2)",
        oracle=None,
        params={'mu': mu, 'theta': theta, 'dimension': dimension, 'horizon': horizon})


@dataclass(frozen=True)
class BankEntry:
    name: str
    build: object
    summary: str


PROBLEMS = {
    'zero': BankEntry('zero', zero, "identically zero data"),
    'constant_drift_f': BankEntry('constant_drift_f', constant_drift_f, "constant driver under a constant drift"),
    'monotone_ode': BankEntry('monotone_ode', monotone_ode, "monotone linear ODE"),
    'ou_additive': BankEntry('ou_additive', ou_additive, "additive-noise OU field"),
    'heat_bump': BankEntry('heat_bump', heat_bump, "heat flow of a Gaussian bump"),
    'linear_g': BankEntry('linear_g', linear_g, "noise coefficient linear in z"),
    'linear_terminal': BankEntry('linear_terminal', linear_terminal, "linear terminal data"),
    'ou_diffusion': BankEntry('ou_diffusion', ou_diffusion_problem, "OU forward flow"),
}


def get_problem(name, **params):
    try:
        entry = PROBLEMS[name]
    except KeyError:
        raise ConfigurationError("unknown problem {!r}; known: {}".format(name, ", ".join(sorted(PROBLEMS))))
    try:
        return entry.build(**params)
    except TypeError as e:
        raise ConfigurationError("bad parameters for problem {!r}: {}".format(name, e))


def list_bank():
    """One description dict per built-in problem, in name order."""
    out = []
    for name in sorted(PROBLEMS):
        problem = PROBLEMS[name].build()
        out.append({
            'name': name,
            'summary': PROBLEMS[name].summary,
            'description': problem.description,
            'has_oracle': problem.oracle is not None,
            'oracle': problem.oracle,
            'horizon': problem.horizon,
            'params': dict(problem.params),
        })
    return out
