"""Nonlinear large deviations for functions of i.i.d. Bernoulli vectors."""

__version__ = "0.1.0"
