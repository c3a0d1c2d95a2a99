"""Small reference functionals: Curie-Weiss, nearest-neighbour chain, linear, and tabulated."""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import sparse

from ..entropy import check_point
from ..errors import BudgetExceeded, DomainError
from .base import DensePairBound, SmoothFunctional, SparsePairBound, UniformPairBound, ZeroPairBound, all_binary_states


class CurieWeiss(SmoothFunctional):
    """``f(x) = (beta/n) sum_{i<j} x_i x_j``."""

    multilinear = True
    permutation_invariant = True

    def __init__(self, n: int, beta: float = 1.0):
        if n < 2:
            raise DomainError("need n >= 2")
        super().__init__(n)
        self.beta = float(beta)
        self.monotone = self.beta >= 0

    def value(self, x) -> float:
        x = check_point(x, self.n)
        s = x.sum()
        return float(self.beta * (s * s - x @ x) / (2 * self.n))

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        s = X.sum(axis=1)
        return self.beta * (s * s - (X * X).sum(axis=1)) / (2 * self.n)

    def grad(self, x) -> np.ndarray:
        x = check_point(x, self.n)
        return self.beta * (x.sum() - x) / self.n

    def grad_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        return self.beta * (X.sum(axis=1, keepdims=True) - X) / self.n

    def symmetric_value(self, u: float) -> float:
        """``f`` at the constant point ``(u, ..., u)``."""
        return self.beta * (self.n - 1) * u * u / 2

    @cached_property
    def bound_a(self) -> float:
        return abs(self.beta) * (self.n - 1) / 2

    @cached_property
    def bound_b(self) -> np.ndarray:
        return np.full(self.n, abs(self.beta) * (self.n - 1) / self.n)

    @cached_property
    def bound_c(self) -> UniformPairBound:
        return UniformPairBound(self.n, 0.0, abs(self.beta) / self.n)

    def describe(self):
        return {"functional": "curie_weiss", "n": self.n, "beta": self.beta}


class Chain(SmoothFunctional):
    """``f(x) = sum_{i=1}^{n-1} x_i x_{i+1}`` (open boundary)."""

    multilinear = True
    monotone = True

    def value(self, x) -> float:
        x = check_point(x, self.n)
        return float(x[:-1] @ x[1:])

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        return (X[:, :-1] * X[:, 1:]).sum(axis=1)

    def grad(self, x) -> np.ndarray:
        x = check_point(x, self.n)
        g = np.zeros(self.n)
        g[:-1] += x[1:]
        g[1:] += x[:-1]
        return g

    def grad_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        G = np.zeros_like(X)
        G[:, :-1] += X[:, 1:]
        G[:, 1:] += X[:, :-1]
        return G

    @cached_property
    def bound_a(self) -> float:
        return float(self.n - 1)

    @cached_property
    def bound_b(self) -> np.ndarray:
        b = np.full(self.n, 2.0)
        b[0] = b[-1] = 1.0
        return b

    @cached_property
    def bound_c(self) -> SparsePairBound:
        off = np.ones(self.n - 1)
        return SparsePairBound(sparse.diags([off, off], [-1, 1], shape=(self.n, self.n)))

    def describe(self):
        return {"functional": "chain", "n": self.n}


class Linear(SmoothFunctional):
    """``f(x) = sum_i w_i x_i`` (or ``c * sum x_i`` for scalar ``w``)."""

    multilinear = True

    def __init__(self, n: int, w=1.0):
        super().__init__(n)
        self.w = np.broadcast_to(np.asarray(w, dtype=float), (n,)).copy()
        self.monotone = bool(np.all(self.w >= 0))
        self.permutation_invariant = bool(np.all(self.w == self.w[0]))

    def value(self, x) -> float:
        return float(check_point(x, self.n) @ self.w)

    def value_batch(self, X) -> np.ndarray:
        return np.atleast_2d(check_point(X, self.n)) @ self.w

    def grad(self, x) -> np.ndarray:
        check_point(x, self.n)
        return self.w.copy()

    def grad_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        return np.broadcast_to(self.w, X.shape).copy()

    @cached_property
    def bound_a(self) -> float:
        # sup over the cube of |w.x|
        return float(max(self.w.clip(min=0).sum(), -self.w.clip(max=0).sum()))

    @cached_property
    def bound_b(self) -> np.ndarray:
        return np.abs(self.w)

    @cached_property
    def bound_c(self) -> ZeroPairBound:
        return ZeroPairBound(self.n)

    def describe(self):
        return {"functional": "linear", "n": self.n, "w": self.w.tolist()}


class TableFunctional(SmoothFunctional):
    """Multilinear extension of an arbitrary table ``{0,1}^n -> R``.

    State ``s`` is indexed by the integer whose bit ``i`` is ``s_i``.  All bound
    constants are exact: a multilinear polynomial and each of its partial
    derivatives attains its sup-norm at a vertex of the cube.
    """

    multilinear = True
    MAX_N = 16

    def __init__(self, table):
        table = np.asarray(table, dtype=float).ravel()
        n = int(round(np.log2(table.size)))
        if 1 << n != table.size:
            raise DomainError("table length must be a power of two")
        if n > self.MAX_N:
            raise BudgetExceeded(f"tables are limited to n <= {self.MAX_N}")
        super().__init__(n)
        self.table = table
        # axis order reversed so that axis a of the tensor is coordinate n-1-a
        self._tensor = table.reshape((2,) * n)
        diffs = [self._axis_diff(i) for i in range(n)]
        self.monotone = all(d.min() >= 0 for d in diffs)
        self._b = np.array([np.abs(d).max() for d in diffs])
        c = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                dd = np.diff(np.diff(self._tensor, axis=self._axis(i)), axis=self._axis(j))
                c[i, j] = c[j, i] = np.abs(dd).max()
        self._c = c

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "TableFunctional":
        return cls(scale * rng.standard_normal(1 << n))

    @classmethod
    def from_functional(cls, f: SmoothFunctional) -> "TableFunctional":
        return cls(f.value_batch(all_binary_states(f.n)))

    def _axis(self, i: int) -> int:
        return self.n - 1 - i

    def _axis_diff(self, i: int) -> np.ndarray:
        return np.diff(self._tensor, axis=self._axis(i))

    def value(self, x) -> float:
        x = check_point(x, self.n)
        out = self._tensor
        for i in range(self.n):
            out = out @ np.array([1.0 - x[i], x[i]])
        return float(out)

    def grad(self, x) -> np.ndarray:
        x = check_point(x, self.n)
        g = np.empty(self.n)
        for i in range(self.n):
            out = self._axis_diff(i)
            for j in range(self.n):
                w = np.array([1.0]) if j == i else np.array([1.0 - x[j], x[j]])
                out = out @ w
            g[i] = float(out)
        return g

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        binary = np.all((X == 0) | (X == 1), axis=1)
        out = np.empty(X.shape[0])
        if binary.any():
            codes = (X[binary].astype(np.int64) << np.arange(self.n)).sum(axis=1)
            out[binary] = self.table[codes]
        rows = np.flatnonzero(~binary)
        # contract the table one coordinate at a time, coordinate 0 being the fastest index
        for start in range(0, rows.size, 64):
            idx = rows[start : start + 64]
            V = np.broadcast_to(self.table, (idx.size, self.table.size))
            for i in range(self.n):
                V = V.reshape(idx.size, -1, 2)
                V = V[:, :, 0] * (1.0 - X[idx, i])[:, None] + V[:, :, 1] * X[idx, i][:, None]
            out[idx] = V[:, 0]
        return out

    @cached_property
    def bound_a(self) -> float:
        return float(np.abs(self.table).max())

    @cached_property
    def bound_b(self) -> np.ndarray:
        return self._b.copy()

    @cached_property
    def bound_c(self) -> DensePairBound:
        return DensePairBound(self._c)

    def describe(self):
        return {"functional": "table", "n": self.n}


class LinearShift(SmoothFunctional):
    """``f(x) + sum_i w_i x_i``; the bounds shift by ``|w|``."""

    def __init__(self, base: SmoothFunctional, w):
        super().__init__(base.n)
        self.base = base
        self.w = np.broadcast_to(np.asarray(w, dtype=float), (base.n,)).copy()
        self.multilinear = base.multilinear
        self.monotone = base.monotone and bool(np.all(self.w >= 0))
        self.permutation_invariant = base.permutation_invariant and bool(np.all(self.w == self.w[0]))

    def value(self, x) -> float:
        return self.base.value(x) + float(np.asarray(x, dtype=float) @ self.w)

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.base.value_batch(X) + X @ self.w

    def grad(self, x) -> np.ndarray:
        return self.base.grad(x) + self.w

    def grad_batch(self, X) -> np.ndarray:
        return self.base.grad_batch(X) + self.w

    def mean(self, p: float) -> float:
        return self.base.mean(p) + p * float(self.w.sum())

    @cached_property
    def bound_a(self) -> float:
        return self.base.bound_a + float(np.abs(self.w).sum())

    @cached_property
    def bound_b(self) -> np.ndarray:
        return self.base.bound_b + np.abs(self.w)

    @property
    def bound_c(self):
        return self.base.bound_c

    def describe(self):
        return {"functional": "linear_shift", "base": self.base.describe()}
