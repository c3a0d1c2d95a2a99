"""Smooth functionals on the hypercube and their certified bound constants.

A functional carries three kinds of sup-norm bounds over ``[0,1]^n``:
``a = ||f||``, ``b_i = ||f_i||`` and ``c_ij = ||f_ij||``.  The second-derivative
bounds are kept as *rules* (``PairBound`` subclasses) so that the aggregate sums
needed by the error budgets can be taken in closed form without an n-by-n table.
"""

from __future__ import annotations

import abc

import numpy as np
from scipy import sparse

from ..errors import BudgetExceeded, DomainError
from ..entropy import check_point

DENSE_LIMIT = 4096


class PairBound(abc.ABC):
    """Rule giving an upper bound ``c_ij`` on ``|d^2 f / dx_i dx_j|``."""

    def __init__(self, n: int):
        self.n = int(n)

    @abc.abstractmethod
    def entry(self, i: int, j: int) -> float: ...

    @abc.abstractmethod
    def diag(self) -> np.ndarray: ...

    @abc.abstractmethod
    def quad(self, u, v) -> float:
        """``sum_{i,j} u_i c_ij v_j``."""

    @abc.abstractmethod
    def sum_sq(self) -> float:
        """``sum_{i,j} c_ij^2``."""

    def row_sums(self, v=None) -> np.ndarray:
        """``(sum_j c_ij v_j)_i``; default builds it from ``quad`` with unit vectors."""
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        return np.array([self.quad(np.eye(1, self.n, i).ravel(), v) for i in range(self.n)])

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise BudgetExceeded(f"refusing to materialise a {self.n}x{self.n} bound table")
        return np.array([[self.entry(i, j) for j in range(self.n)] for i in range(self.n)])

    def describe(self) -> dict:
        return {"rule": type(self).__name__, "n": self.n}


class ZeroPairBound(PairBound):
    def entry(self, i, j):
        return 0.0

    def diag(self):
        return np.zeros(self.n)

    def quad(self, u, v):
        return 0.0

    def sum_sq(self):
        return 0.0

    def row_sums(self, v=None):
        return np.zeros(self.n)

    def dense(self):
        return np.zeros((self.n, self.n))


class DensePairBound(PairBound):
    """Explicit table; only for small ``n``."""

    def __init__(self, table):
        table = np.asarray(table, dtype=float)
        super().__init__(table.shape[0])
        self.table = table

    def entry(self, i, j):
        return float(self.table[i, j])

    def diag(self):
        return np.diag(self.table).copy()

    def quad(self, u, v):
        return float(np.asarray(u) @ self.table @ np.asarray(v))

    def sum_sq(self):
        return float((self.table**2).sum())

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        return self.table @ v

    def dense(self):
        return self.table.copy()


class SparsePairBound(PairBound):
    def __init__(self, matrix):
        matrix = sparse.csr_matrix(matrix)
        super().__init__(matrix.shape[0])
        self.matrix = matrix

    def entry(self, i, j):
        return float(self.matrix[i, j])

    def diag(self):
        return self.matrix.diagonal().astype(float)

    def quad(self, u, v):
        return float(np.asarray(u) @ (self.matrix @ np.asarray(v, dtype=float)))

    def sum_sq(self):
        return float(self.matrix.multiply(self.matrix).sum())

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        return self.matrix @ v

    def dense(self):
        return self.matrix.toarray()


class UniformPairBound(PairBound):
    """``c_ii = d`` on the diagonal and ``c_ij = o`` off it."""

    def __init__(self, n, diagonal: float, off: float):
        super().__init__(n)
        self.diagonal = float(diagonal)
        self.off = float(off)

    def entry(self, i, j):
        return self.diagonal if i == j else self.off

    def diag(self):
        return np.full(self.n, self.diagonal)

    def quad(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return float(self.off * u.sum() * v.sum() + (self.diagonal - self.off) * (u @ v))

    def sum_sq(self):
        return self.n * self.diagonal**2 + self.n * (self.n - 1) * self.off**2

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        return self.off * v.sum() + (self.diagonal - self.off) * v

    def describe(self):
        return {"rule": "uniform", "n": self.n, "diag": self.diagonal, "off": self.off}


class CirculantPairBound(PairBound):
    """``c_ij = row[(j - i) mod n]`` with a symmetric ``row``."""

    def __init__(self, row):
        row = np.asarray(row, dtype=float)
        super().__init__(row.size)
        self.row = row

    def entry(self, i, j):
        return float(self.row[(j - i) % self.n])

    def diag(self):
        return np.full(self.n, self.row[0])

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        # (C v)_i = sum_j row[j - i] v_j, a circular cross-correlation
        return np.real(np.fft.ifft(np.conj(np.fft.fft(self.row)) * np.fft.fft(v)))

    def quad(self, u, v):
        return float(np.asarray(u, dtype=float) @ self.row_sums(v))

    def sum_sq(self):
        return float(self.n * (self.row**2).sum())

    def describe(self):
        return {"rule": "circulant", "n": self.n, "row": self.row.tolist()}


class EdgePairBound(PairBound):
    """Class-constant rule over vertex pairs of an N-vertex graph.

    Coordinates are the pairs ``(i, j)``, ``i < j``.  The bound depends only on
    how many distinct vertices two pairs span: ``same`` (2, the diagonal),
    ``share`` (3) or ``far`` (4).
    """

    def __init__(self, N: int, same: float, share: float, far: float):
        self.N = int(N)
        super().__init__(self.N * (self.N - 1) // 2)
        self.same = float(same)
        self.share = float(share)
        self.far = float(far)
        self._iu, self._ju = np.triu_indices(self.N, 1)

    def entry(self, e, f):
        if e == f:
            return self.same
        a = {self._iu[e], self._ju[e]}
        b = {self._iu[f], self._ju[f]}
        return self.share if a & b else self.far

    def diag(self):
        return np.full(self.n, self.same)

    def _incidence(self, u):
        U = np.zeros(self.N)
        np.add.at(U, self._iu, u)
        np.add.at(U, self._ju, u)
        return U

    def quad(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        uv = float(u @ v)
        # ordered pairs e != f sharing exactly one endpoint
        shared = float(self._incidence(u) @ self._incidence(v)) - 2.0 * uv
        return self.same * uv + self.share * shared + self.far * (u.sum() * v.sum() - uv - shared)

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        V = self._incidence(v)
        shared = V[self._iu] + V[self._ju] - 2.0 * v
        return self.same * v + self.share * shared + self.far * (v.sum() - v - shared)

    def sum_sq(self):
        n, N = self.n, self.N
        n_share = n * 2 * (N - 2)
        n_far = n * (n - 1) - n_share
        return n * self.same**2 + n_share * self.share**2 + n_far * self.far**2

    def scaled(self, s: float) -> "EdgePairBound":
        return EdgePairBound(self.N, s * self.same, s * self.share, s * self.far)

    def __add__(self, other: "EdgePairBound") -> "EdgePairBound":
        if not isinstance(other, EdgePairBound) or other.N != self.N:
            return NotImplemented
        return EdgePairBound(self.N, self.same + other.same, self.share + other.share, self.far + other.far)

    def describe(self):
        return {"rule": "edge-class", "N": self.N, "same": self.same, "share": self.share, "far": self.far}


class TiltedPairBound(PairBound):
    """``c'_ij = A * c_ij + B * b_i * b_j`` for a base rule ``c`` and vector ``b``."""

    def __init__(self, base: PairBound, A: float, B: float, b):
        super().__init__(base.n)
        self.base = base
        self.A = float(A)
        self.B = float(B)
        self.b = np.asarray(b, dtype=float)

    def entry(self, i, j):
        return self.A * self.base.entry(i, j) + self.B * self.b[i] * self.b[j]

    def diag(self):
        return self.A * self.base.diag() + self.B * self.b**2

    def quad(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.A * self.base.quad(u, v) + self.B * float(u @ self.b) * float(self.b @ v)

    def row_sums(self, v=None):
        v = np.ones(self.n) if v is None else np.asarray(v, dtype=float)
        return self.A * self.base.row_sums(v) + self.B * self.b * float(self.b @ v)

    def sum_sq(self):
        bb = float(self.b @ self.b)
        return self.A**2 * self.base.sum_sq() + 2 * self.A * self.B * self.base.quad(self.b, self.b) + self.B**2 * bb**2

    def describe(self):
        return {"rule": "tilted", "A": self.A, "B": self.B, "base": self.base.describe()}


class SmoothFunctional(abc.ABC):
    """A C^2 function on ``[0,1]^n`` with certified bounds ``a``, ``b_i``, ``c_ij``.

    Subclasses implement ``value`` and ``grad``; ``value_batch`` should be
    overridden with a vectorised version when one is cheap.
    """

    #: every coordinate enters at most linearly in each monomial
    multilinear: bool = False
    #: coordinatewise nondecreasing on the cube
    monotone: bool = False
    #: invariant under all permutations of the coordinates
    permutation_invariant: bool = False

    def __init__(self, n: int):
        if n < 1:
            raise DomainError("dimension must be positive")
        self.n = int(n)

    @abc.abstractmethod
    def value(self, x) -> float: ...

    @abc.abstractmethod
    def grad(self, x) -> np.ndarray: ...

    @property
    @abc.abstractmethod
    def bound_a(self) -> float: ...

    @property
    @abc.abstractmethod
    def bound_b(self) -> np.ndarray: ...

    @property
    @abc.abstractmethod
    def bound_c(self) -> PairBound: ...

    def __call__(self, x) -> float:
        return self.value(x)

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.value(row) for row in X])

    def grad_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.grad(row) for row in X])

    def discrete_gradient(self, x) -> np.ndarray:
        """``(Delta_i f(x))_i`` where ``Delta_i f`` differences coordinate i between 1 and 0."""
        x = check_point(x, self.n)
        if self.multilinear:
            return self.grad(x)
        hi = np.tile(x, (self.n, 1))
        lo = hi.copy()
        idx = np.arange(self.n)
        hi[idx, idx] = 1.0
        lo[idx, idx] = 0.0
        vals = self.value_batch(np.vstack([hi, lo]))
        return vals[: self.n] - vals[self.n :]

    def discrete_derivative(self, x, i: int) -> float:
        x = check_point(x, self.n).copy()
        x[i] = 1.0
        up = self.value(x)
        x[i] = 0.0
        return up - self.value(x)

    def mean(self, p: float) -> float:
        """``E f(Y)`` for i.i.d. Bernoulli(p) coordinates; exact for multilinear f."""
        if not self.multilinear:
            raise NotImplementedError(f"{type(self).__name__} must provide an exact mean")
        return self.value(np.full(self.n, p))

    def describe(self) -> dict:
        return {"functional": type(self).__name__, "n": self.n}


def discrete_derivative(f: SmoothFunctional, x, i: int) -> float:
    """``Delta_i f(x) = f(..., 1, ...) - f(..., 0, ...)`` in coordinate ``i``."""
    return f.discrete_derivative(x, i)


def all_binary_states(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are the binary expansions of ``start .. stop-1`` (bit i = coordinate i)."""
    stop = (1 << n) if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(float)
