"""Finite- and infinite-horizon BDSDE solvers and stationary SPDE solutions."""

__version__ = '0.1.0'
