"""Homomorphism densities of a fixed graph H in weighted graphs, and ERGM Hamiltonians.

A point of the cube is a symmetric weight matrix on N vertices with zero
diagonal, flattened to its ``n = N(N-1)/2`` upper-triangular entries in
``np.triu_indices(N, 1)`` order.  The density counts *all* maps
``[k] -> [N]`` (not only injective ones); maps that collapse an edge of H are
killed by the zero diagonal.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..entropy import check_point
from ..errors import BudgetExceeded, ConfigError, DomainError
from .base import EdgePairBound, SmoothFunctional

# default cap on the optimized einsum FLOP count of one evaluation
DEFAULT_FLOP_BUDGET = 5e9


@dataclass(frozen=True)
class GraphSpec:
    """A simple graph H on vertices ``0..k-1``."""

    k: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("H needs at least two vertices")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ConfigError(f"loop at vertex {u}")
            if not (0 <= u < self.k and 0 <= v < self.k):
                raise ConfigError(f"edge ({u},{v}) outside vertex range 0..{self.k - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ConfigError(f"repeated edge {key}")
            seen.add(key)
            norm.append(key)
        if not norm:
            raise ConfigError("H needs at least one edge")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.k, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    @property
    def is_complete(self) -> bool:
        return self.m == self.k * (self.k - 1) // 2

    @classmethod
    def parse(cls, text: str, name: str = "") -> "GraphSpec":
        """Read the edge-list format: a ``k m`` header then ``m`` lines ``u v`` (1-based)."""
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise ConfigError("empty edge list")
        try:
            k, m = (int(tok) for tok in lines[0].split())
            edges = [tuple(int(tok) - 1 for tok in ln.split()) for ln in lines[1:]]
        except ValueError as exc:
            raise ConfigError(f"malformed edge list: {exc}") from None
        if any(len(e) != 2 for e in edges):
            raise ConfigError("each edge line needs exactly two vertices")
        if len(edges) != m:
            raise ConfigError(f"header declares {m} edges but {len(edges)} were given")
        return cls(k, tuple(edges), name)

    def to_text(self) -> str:
        rows = [f"{self.k} {self.m}"] + [f"{u + 1} {v + 1}" for u, v in self.edges]
        return "\n".join(rows) + "\n"

    @classmethod
    def edge(cls):
        return cls(2, ((0, 1),), "edge")

    @classmethod
    def triangle(cls):
        return cls.clique(3, "triangle")

    @classmethod
    def clique(cls, k: int, name: str = ""):
        return cls(k, tuple((i, j) for i in range(k) for j in range(i + 1, k)), name or f"K{k}")

    @classmethod
    def path(cls, length: int):
        """Path with ``length`` edges."""
        return cls(length + 1, tuple((i, i + 1) for i in range(length)), f"P{length}")

    @classmethod
    def cycle(cls, k: int):
        return cls(k, tuple((i, (i + 1) % k) for i in range(k)), f"C{k}")

    @classmethod
    def named(cls, name: str) -> "GraphSpec":
        """Resolve names such as ``edge``, ``triangle``, ``K4``, ``C4``, ``P2``."""
        key = name.strip()
        if key.lower() == "edge":
            return cls.edge()
        if key.lower() == "triangle":
            return cls.triangle()
        match = re.fullmatch(r"([KCP])(\d+)", key)
        if match:
            kind, size = match.group(1), int(match.group(2))
            return {"K": cls.clique, "C": cls.cycle, "P": cls.path}[kind](size)
        raise ConfigError(f"unknown graph name {name!r}")


@dataclass(frozen=True)
class EdgeVector:
    """Upper-triangular weights of a symmetric N x N matrix with zero diagonal."""

    N: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = check_point(self.values, self.N * (self.N - 1) // 2)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size

    def matrix(self) -> np.ndarray:
        return edge_matrix(self.values, self.N)

    @classmethod
    def from_matrix(cls, M) -> "EdgeVector":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DomainError("expected a square matrix")
        if not np.allclose(M, M.T):
            raise DomainError("edge matrix must be symmetric")
        return cls(M.shape[0], M[np.triu_indices(M.shape[0], 1)])

    @classmethod
    def constant(cls, N: int, value: float) -> "EdgeVector":
        return cls(N, np.full(N * (N - 1) // 2, float(value)))


def vertex_count(n: int) -> int:
    """Invert ``n = N(N-1)/2``."""
    N = int(round((1 + math.sqrt(1 + 8 * n)) / 2))
    if N * (N - 1) // 2 != n:
        raise DomainError(f"{n} is not a triangular number of vertex pairs")
    return N


def edge_matrix(values, N: int) -> np.ndarray:
    """Symmetric zero-diagonal matrix (or stack of matrices) from flattened pair weights."""
    values = np.asarray(values, dtype=float)
    iu, ju = np.triu_indices(N, 1)
    M = np.zeros(values.shape[:-1] + (N, N))
    M[..., iu, ju] = values
    M[..., ju, iu] = values
    return M


def _set_partitions(k: int):
    """Yield restricted-growth strings of length k (one per set partition)."""
    labels = [0] * k

    def rec(i, top):
        if i == k:
            yield tuple(labels)
            return
        for lab in range(top + 2):
            labels[i] = lab
            yield from rec(i + 1, max(top, lab))

    if k:
        yield from rec(1, 0)


def _falling(N: int, r: int) -> int:
    out = 1
    for j in range(r):
        out *= N - j
    return out


class HomDensity(SmoothFunctional):
    """``T(x) = N^{-(k-2)} sum_{q in [N]^k} prod_{(l,l') in E(H)} x_{q_l q_l'}``.

    Evaluated by tensor contraction; construction fails with ``BudgetExceeded``
    when the contraction cost for (H, N) is above ``flop_budget``.
    """

    monotone = True

    def __init__(self, H: GraphSpec, N: int, flop_budget: float = DEFAULT_FLOP_BUDGET):
        if N < 2:
            raise DomainError("need at least two vertices")
        super().__init__(N * (N - 1) // 2)
        self.H = H
        self.N = int(N)
        self.multilinear = H.is_complete
        self.scale = float(N) ** (-(H.k - 2))
        letters = string.ascii_lowercase
        if H.k > 25:
            raise BudgetExceeded("graphs with more than 25 vertices are not supported")
        self._vertex = letters[: H.k]
        self._batch = "z"
        terms = [self._vertex[u] + self._vertex[v] for u, v in H.edges]
        # a ones-vector per vertex keeps isolated vertices in the index set
        self._value_expr = ",".join(terms + list(self._vertex)) + "->"
        self._grad_exprs = []
        for e, (u, v) in enumerate(H.edges):
            others = terms[:e] + terms[e + 1 :]
            self._grad_exprs.append(",".join(others + list(self._vertex)) + "->" + self._vertex[u] + self._vertex[v])
        batch_terms = [self._batch + t for t in terms]
        self._batch_expr = ",".join(batch_terms + list(self._vertex)) + "->" + self._batch
        ones = np.ones(self.N)
        M = np.zeros((self.N, self.N))
        self._ones = [ones] * H.k
        path, report = np.einsum_path(self._value_expr, *([M] * H.m), *self._ones, optimize="greedy")
        match = re.search(r"Optimized FLOP count:\s*([0-9.eE+]+)", report)
        self.flops = float(match.group(1)) if match else float(N) ** H.k
        if self.flops > flop_budget:
            raise BudgetExceeded(
                f"contraction for {H.name or 'H'} at N={N} needs ~{self.flops:.3g} flops (budget {flop_budget:.3g})"
            )
        self._value_path = path
        self._grad_paths = [
            np.einsum_path(expr, *([M] * (H.m - 1)), *self._ones, optimize="greedy")[0] for expr in self._grad_exprs
        ]
        self._batch_paths: dict[int, list] = {}
        # for small index spaces the plain C loop beats the path machinery
        if float(N) ** H.k <= 1e6:
            self._value_path = False
            self._grad_paths = [False] * H.m

    def value(self, x) -> float:
        M = edge_matrix(check_point(x, self.n), self.N)
        out = np.einsum(self._value_expr, *([M] * self.H.m), *self._ones, optimize=self._value_path)
        return float(out) * self.scale

    def value_batch(self, X, chunk: int = 4096) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            Ms = edge_matrix(X[start : start + chunk], self.N)
            size = Ms.shape[0]
            if size not in self._batch_paths:
                self._batch_paths[size] = np.einsum_path(
                    self._batch_expr, *([Ms] * self.H.m), *self._ones, optimize="greedy"
                )[0]
            out[start : start + size] = np.einsum(
                self._batch_expr, *([Ms] * self.H.m), *self._ones, optimize=self._batch_paths[size]
            )
        return out * self.scale

    def grad(self, x) -> np.ndarray:
        M = edge_matrix(check_point(x, self.n), self.N)
        G = np.zeros((self.N, self.N))
        mats = [M] * (self.H.m - 1)
        for expr, path in zip(self._grad_exprs, self._grad_paths):
            G += np.einsum(expr, *mats, *self._ones, optimize=path)
        iu, ju = np.triu_indices(self.N, 1)
        # x_ij enters through both M[i,j] and M[j,i]
        return (G[iu, ju] + G[ju, iu]) * self.scale

    def grad_batch(self, X, chunk: int = 2048) -> np.ndarray:
        X = np.atleast_2d(check_point(X, self.n))
        iu, ju = np.triu_indices(self.N, 1)
        out = np.empty_like(X)
        for start in range(0, X.shape[0], chunk):
            Ms = edge_matrix(X[start : start + chunk], self.N)
            G = np.zeros_like(Ms)
            for e, (u, v) in enumerate(self.H.edges):
                terms = [self._batch + self._vertex[a] + self._vertex[b] for i, (a, b) in enumerate(self.H.edges) if i != e]
                if terms:
                    expr = ",".join(terms + list(self._vertex)) + "->" + self._batch + self._vertex[u] + self._vertex[v]
                    G += np.einsum(expr, *([Ms] * len(terms)), *self._ones, optimize="greedy")
                else:
                    # single-edge H: the derivative does not depend on x
                    expr = ",".join(self._vertex) + "->" + self._vertex[u] + self._vertex[v]
                    G += np.einsum(expr, *self._ones)[None]
            out[start : start + chunk] = G[:, iu, ju] + G[:, ju, iu]
        return out * self.scale

    def grad_matrix(self, x) -> np.ndarray:
        """Gradient arranged as a symmetric zero-diagonal N x N matrix."""
        return edge_matrix(self.grad(x), self.N)

    def mean(self, p: float) -> float:
        """Exact ``E T(Y)`` for i.i.d. Bernoulli(p) edges, summed over set partitions of V(H)."""
        total = 0.0
        for labels in _set_partitions(self.H.k):
            pairs = set()
            dead = False
            for u, v in self.H.edges:
                a, b = labels[u], labels[v]
                if a == b:
                    dead = True
                    break
                pairs.add((min(a, b), max(a, b)))
            if dead:
                continue
            r = max(labels) + 1
            total += _falling(self.N, r) * p ** len(pairs)
        return total * self.scale

    @cached_property
    def bound_a(self) -> float:
        return float(self.N**2)

    @cached_property
    def bound_b(self) -> np.ndarray:
        return np.full(self.n, 2.0 * self.H.m)

    @cached_property
    def bound_c(self) -> EdgePairBound:
        m = self.H.m
        near = 4.0 * m * (m - 1) / self.N
        far = 4.0 * m * (m - 1) / self.N**2
        return EdgePairBound(self.N, near, near, far)

    def describe(self):
        return {
            "functional": "homdensity",
            "H": self.H.name or self.H.to_text(),
            "k": self.H.k,
            "m": self.H.m,
            "N": self.N,
            "n": self.n,
        }


@dataclass(frozen=True)
class ErgmSpec:
    graphs: tuple[GraphSpec, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        if len(self.graphs) < 1:
            raise ConfigError("an ERGM needs at least one graph")
        if len(self.graphs) != len(self.betas):
            raise ConfigError("graphs and betas must have equal length")
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    @property
    def l(self) -> int:
        return len(self.graphs)

    @property
    def B(self) -> float:
        return 1.0 + sum(abs(b) for b in self.betas)


class Ergm(SmoothFunctional):
    """``f(x) = sum_r beta_r T_r(x)``; bounds combine linearly in ``|beta_r|``."""

    def __init__(self, spec: ErgmSpec, N: int, flop_budget: float = DEFAULT_FLOP_BUDGET):
        super().__init__(N * (N - 1) // 2)
        self.spec = spec
        self.N = int(N)
        self.parts = [HomDensity(H, N, flop_budget) for H in spec.graphs]
        self.betas = np.array(spec.betas)
        self.multilinear = all(T.multilinear for T in self.parts)
        self.monotone = bool(np.all(self.betas >= 0))

    def value(self, x) -> float:
        return float(sum(b * T.value(x) for b, T in zip(self.betas, self.parts)))

    def value_batch(self, X) -> np.ndarray:
        return sum(b * T.value_batch(X) for b, T in zip(self.betas, self.parts))

    def grad(self, x) -> np.ndarray:
        return sum(b * T.grad(x) for b, T in zip(self.betas, self.parts))

    def grad_batch(self, X) -> np.ndarray:
        return sum(b * T.grad_batch(X) for b, T in zip(self.betas, self.parts))

    def mean(self, p: float) -> float:
        return float(sum(b * T.mean(p) for b, T in zip(self.betas, self.parts)))

    @cached_property
    def bound_a(self) -> float:
        return float(np.abs(self.betas).sum() * self.N**2)

    @cached_property
    def bound_b(self) -> np.ndarray:
        return sum(abs(b) * T.bound_b for b, T in zip(self.betas, self.parts))

    @cached_property
    def bound_c(self) -> EdgePairBound:
        out = EdgePairBound(self.N, 0.0, 0.0, 0.0)
        for b, T in zip(self.betas, self.parts):
            out = out + T.bound_c.scaled(abs(b))
        return out

    def describe(self):
        return {
            "functional": "ergm",
            "N": self.N,
            "graphs": [H.name or H.to_text() for H in self.spec.graphs],
            "betas": list(self.spec.betas),
        }
