"""Smoothed indicator of the upper-tail event, and the tilted Hamiltonian built from it."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from ..entropy import bernoulli_parameter, check_point
from ..errors import DomainError
from .base import SmoothFunctional, TiltedPairBound

# exact sup|h'| on [-1, 0] (attained at the midpoint)
H_PRIME_MAX = 15.0 / 8.0
# sup|h''| = 10/sqrt(3), attained at (x+1) = 1/2 -+ 1/(2 sqrt 3)
H_SECOND_MAX = 10.0 / math.sqrt(3.0)
# the cruder constants used in the budgets
L1 = 2.0
L2 = 6.0


def smooth_step(z):
    """``h(z) = 10(z+1)^3 - 15(z+1)^4 + 6(z+1)^5 - 1`` on [-1, 0]; -1 below and 0 above."""
    z = np.asarray(z, dtype=float)
    w = np.clip(z + 1.0, 0.0, 1.0)
    out = w**3 * (10.0 - 15.0 * w + 6.0 * w * w) - 1.0
    return float(out) if out.ndim == 0 else out


def smooth_step_prime(z):
    z = np.asarray(z, dtype=float)
    w = z + 1.0
    out = np.where((w > 0) & (w < 1), 30.0 * w**2 * (1.0 - w) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def smooth_step_second(z):
    z = np.asarray(z, dtype=float)
    w = z + 1.0
    out = np.where((w > 0) & (w < 1), 60.0 * w * (1.0 - w) * (1.0 - 2.0 * w), 0.0)
    return float(out) if out.ndim == 0 else out


class TiltedHamiltonian(SmoothFunctional):
    """``g(x) = n psi(f(x)/n) + sum_i (x_i log p + (1 - x_i) log(1 - p))`` with ``psi(y) = K h((y - t)/delta)``.

    On binary x, ``e^{g(x)}`` equals ``P(Y = x)`` when ``f(x) >= tn`` and is
    damped by ``e^{-nK}`` when ``f(x) <= (t - delta) n``.
    """

    def __init__(self, f: SmoothFunctional, p: float, t: float, delta: float, K: float):
        if delta <= 0:
            raise DomainError("delta must be positive")
        if K < 0:
            raise DomainError("K must be nonnegative")
        super().__init__(f.n)
        self.f = f
        self.p = bernoulli_parameter(p)
        self.t = float(t)
        self.delta = float(delta)
        self.K = float(K)
        self.log_p = math.log(self.p)
        self.log_q = math.log1p(-self.p)
        self.C_p = abs(self.log_p) + abs(self.log_q)

    def psi(self, y):
        return self.K * smooth_step((np.asarray(y) - self.t) / self.delta)

    def psi_prime(self, y):
        return self.K / self.delta * smooth_step_prime((np.asarray(y) - self.t) / self.delta)

    def value(self, x) -> float:
        x = check_point(x, self.n)
        base = float(x.sum() * self.log_p + (self.n - x.sum()) * self.log_q)
        return self.n * float(self.psi(self.f.value(x) / self.n)) + base

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        s = X.sum(axis=1)
        return self.n * self.psi(self.f.value_batch(X) / self.n) + s * self.log_p + (self.n - s) * self.log_q

    def grad(self, x) -> np.ndarray:
        x = check_point(x, self.n)
        return float(self.psi_prime(self.f.value(x) / self.n)) * self.f.grad(x) + (self.log_p - self.log_q)

    @cached_property
    def bound_a(self) -> float:
        # alpha
        return self.n * self.K + self.n * self.C_p

    @cached_property
    def bound_b(self) -> np.ndarray:
        # beta_i
        return L1 * self.K * self.f.bound_b / self.delta + self.C_p

    @cached_property
    def bound_c(self) -> TiltedPairBound:
        # gamma_ij = 2K c_ij / delta + 6K b_i b_j / (n delta^2)
        return TiltedPairBound(
            self.f.bound_c,
            L1 * self.K / self.delta,
            L2 * self.K / (self.n * self.delta**2),
            self.f.bound_b,
        )

    def describe(self):
        return {
            "functional": "tilted",
            "base": self.f.describe(),
            "p": self.p,
            "t": self.t,
            "delta": self.delta,
            "K": self.K,
        }
