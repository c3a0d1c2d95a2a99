"""Normalized count of 3-term arithmetic progressions in Z/nZ."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from ..entropy import check_point
from ..errors import DomainError
from .base import CirculantPairBound, SmoothFunctional


def ap3_pair_row(n: int) -> np.ndarray:
    """Exact multiplicity bound ``c(d)`` for ``|f_{k,k+d}|``.

    A progression ``(i, i+j, i+2j)`` contributes to the mixed derivative in
    ``x_k, x_{k+d}`` once for every ordered pair of distinct slots (r, s) with
    ``(s-r) j = d``.  Slot gaps of +-1 give one solution j each; gaps of +-2
    give one solution for odd n, and two or zero (d even or odd) for even n.
    """
    d = np.arange(n)
    if n % 2:
        gap2 = np.ones(n)
    else:
        gap2 = np.where(d % 2 == 0, 2.0, 0.0)
    return (4.0 + 2.0 * gap2) / n


class AP3(SmoothFunctional):
    """``f(x) = (1/n) sum_{i,j in Z/nZ} x_i x_{i+j} x_{i+2j}``, the ``j = 0`` terms included."""

    monotone = True

    def __init__(self, n: int):
        if n < 3:
            raise DomainError("need n >= 3")
        super().__init__(n)
        idx = np.arange(n)
        self._plus = (idx[:, None] + idx[None, :]) % n
        self._plus2 = (idx[:, None] + 2 * idx[None, :]) % n
        self._minus = (idx[:, None] - idx[None, :]) % n
        self._minus2 = (idx[:, None] - 2 * idx[None, :]) % n
        # b -> 2b mod n, used by the convolution form of the value
        self._double = (2 * idx) % n

    def value(self, x) -> float:
        return float(self.value_batch(np.asarray(x)[None, :])[0])

    def value_batch(self, X) -> np.ndarray:
        # a + c = 2b parametrizes (i, i+j, i+2j) bijectively, so
        # f = (1/n) sum_b x_b (x * x)[2b] with * the cyclic convolution
        X = np.atleast_2d(check_point(X, self.n))
        F = np.fft.rfft(X, axis=-1)
        conv = np.fft.irfft(F * F, n=self.n, axis=-1)
        return (X * conv[:, self._double]).sum(axis=-1) / self.n

    def value_direct(self, x) -> float:
        """Plain double sum over (i, j); used as an independent check."""
        x = check_point(x, self.n)
        return float((x[:, None] * x[self._plus] * x[self._plus2]).sum() / self.n)

    def grad(self, x) -> np.ndarray:
        x = check_point(x, self.n)
        total = x[self._plus] * x[self._plus2] + x[self._minus] * x[self._plus] + x[self._minus2] * x[self._minus]
        return total.sum(axis=1) / self.n

    def grad_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        total = (
            X[:, self._plus] * X[:, self._plus2]
            + X[:, self._minus] * X[:, self._plus]
            + X[:, self._minus2] * X[:, self._minus]
        )
        return total.sum(axis=2) / self.n

    def mean(self, p: float) -> float:
        # j = 0 touches one site, j = n/2 (n even) two sites, every other j three
        even = 1 if self.n % 2 == 0 else 0
        return float(p + even * p**2 + (self.n - 1 - even) * p**3)

    @cached_property
    def bound_a(self) -> float:
        return float(self.n)

    @cached_property
    def bound_b(self) -> np.ndarray:
        return np.full(self.n, 3.0)

    @cached_property
    def bound_c(self) -> CirculantPairBound:
        return CirculantPairBound(ap3_pair_row(self.n))

    def describe(self):
        return {"functional": "ap3", "n": self.n}
