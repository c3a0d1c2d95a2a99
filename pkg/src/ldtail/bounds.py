"""Explicit error budgets for upper-tail probabilities and free energies.

Every evaluator works from a ``SmoothnessBudget``: the sup-norm bound ``a``,
the coordinate bounds ``b_i`` and a ``PairBound`` rule for ``c_ij``.  Aggregate
sums are taken from the rule in closed form, never from an n-by-n table.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .entropy import bernoulli_parameter
from .errors import CertificateError, DomainError
from .functionals.base import PairBound, SmoothFunctional, TiltedPairBound
from .functionals.graphs import GraphSpec
from .functionals.tilted import L1, L2

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SmoothnessBudget:
    n: int
    a: float
    b: np.ndarray = field(repr=False)
    c: PairBound = field(repr=False)

    @classmethod
    def from_functional(cls, f: SmoothFunctional) -> "SmoothnessBudget":
        return cls(f.n, float(f.bound_a), np.asarray(f.bound_b, dtype=float), f.bound_c)

    @property
    def sum_b2(self) -> float:
        return float(self.b @ self.b)

    @property
    def sum_cii(self) -> float:
        return float(self.c.diag().sum())

    @property
    def sum_cii2(self) -> float:
        d = self.c.diag()
        return float(d @ d)

    @property
    def sum_c2(self) -> float:
        return float(self.c.sum_sq())

    @property
    def sum_bbc(self) -> float:
        return float(self.c.quad(self.b, self.b))

    @property
    def sum_bc(self) -> float:
        return float(self.c.quad(self.b, np.ones(self.n)))

    @property
    def sum_acb(self) -> float:
        return self.a * self.sum_cii + self.sum_b2

    def sums(self) -> dict:
        return {
            "a": self.a,
            "sum_b2": self.sum_b2,
            "sum_cii": self.sum_cii,
            "sum_cii2": self.sum_cii2,
            "sum_c2": self.sum_c2,
            "sum_bbc": self.sum_bbc,
            "sum_bc": self.sum_bc,
            "sum_acb": self.sum_acb,
        }


def smoothness_formula(budget: SmoothnessBudget) -> float:
    """``4 (S1 + S2/4)^{1/2} + (1/4)(sum b^2)^{1/2}(sum c_ii^2)^{1/2} + 3 sum c_ii + log 2``.

    ``S1 = sum_i (a c_ii + b_i^2)`` and ``S2 = sum_ij (a c_ij^2 + b_i b_j c_ij + 4 b_i c_ij)``.
    """
    inner = budget.sum_acb + 0.25 * (budget.a * budget.sum_c2 + budget.sum_bbc + 4.0 * budget.sum_bc)
    return (
        4.0 * math.sqrt(max(inner, 0.0))
        + 0.25 * math.sqrt(budget.sum_b2) * math.sqrt(budget.sum_cii2)
        + 3.0 * budget.sum_cii
        + LOG2
    )


@dataclass(frozen=True)
class TailBudgetParams:
    """Parameters of the tail bound: the tilt level ``K`` and the derived alpha, beta, gamma."""

    p: float
    t: float
    delta: float
    eps: float
    K: float
    net_size_log: float
    base: SmoothnessBudget = field(repr=False)

    def __post_init__(self):
        bernoulli_parameter(self.p)
        if self.delta <= 0 or self.eps <= 0:
            raise DomainError("delta and eps must be positive")
        if self.K < 0:
            raise DomainError("K must be nonnegative")
        if self.net_size_log < 0:
            raise DomainError("a net has at least one element")

    @property
    def C_p(self) -> float:
        return abs(math.log(self.p)) + abs(math.log1p(-self.p))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def alpha(self) -> float:
        return self.n * self.K + self.n * self.C_p

    @property
    def beta(self) -> np.ndarray:
        return L1 * self.K * self.base.b / self.delta + self.C_p

    @property
    def gamma(self) -> TiltedPairBound:
        return TiltedPairBound(self.base.c, L1 * self.K / self.delta, L2 * self.K / (self.n * self.delta**2), self.base.b)

    def tilted_budget(self) -> SmoothnessBudget:
        return SmoothnessBudget(self.n, self.alpha, self.beta, self.gamma)

    @property
    def net_radius(self) -> float:
        """Radius ``delta eps / (4K)`` at which the gradient net must be built."""
        return math.inf if self.K == 0 else self.delta * self.eps / (4.0 * self.K)


def complexity_log_term(K: float, sum_b2: float, n: int, delta: float, eps: float) -> float:
    """``log(4K (sum b^2 / n)^{1/2} / (delta eps))``, floored at the integer grid count it stands for.

    The term counts a grid of tilt values; when the displayed ratio is small the
    grid still has ``max(1, ceil(15 R / 16))`` points, which we use instead.
    Zero when ``K = 0`` or all ``b_i = 0``.
    """
    if K == 0 or sum_b2 == 0:
        return 0.0
    R = 4.0 * K * math.sqrt(sum_b2 / n) / (delta * eps)
    return math.log(max(R, math.ceil(15.0 * R / 16.0), 1.0))


def tail_complexity_term(params: TailBudgetParams, budget: SmoothnessBudget | None = None) -> float:
    budget = budget or params.base
    beta = params.beta
    n = params.n
    return (
        0.25 * math.sqrt(n * float(beta @ beta)) * params.eps
        + 3.0 * n * params.eps
        + complexity_log_term(params.K, budget.sum_b2, n, params.delta, params.eps)
        + (0.0 if params.K == 0 else params.net_size_log)
    )


def tail_smoothness_term(params: TailBudgetParams) -> float:
    return smoothness_formula(params.tilted_budget())


def tail_lower_slack(budget: SmoothnessBudget, p: float) -> tuple[float, float]:
    """``(eps0, delta0)`` of the lower tail bound."""
    p = bernoulli_parameter(p)
    n = budget.n
    eps0 = (4.0 + abs(math.log(p / (1 - p)))) / math.sqrt(n)
    delta0 = 2.0 / n * math.sqrt(budget.sum_acb)
    return eps0, delta0


@dataclass
class ErrorBudget:
    complexity: float
    smoothness: float
    eps0: float
    delta0: float
    lower: float
    upper: float
    items: dict = field(default_factory=dict)

    @property
    def interval(self) -> tuple[float, float]:
        return self.lower, self.upper

    def contains(self, value: float, tol: float = 1e-6) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def to_dict(self) -> dict:
        out = asdict(self)
        out["items"] = {k: _jsonable(v) for k, v in self.items.items()}
        return out


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def tail_sandwich(
    f: SmoothFunctional,
    p: float,
    t: float,
    delta: float,
    eps: float,
    *,
    K_phi: float,
    phi_lower_at_t_minus_delta: float,
    phi_upper_at_t_plus_delta0: float,
    net_size_log: float,
    certified: dict | None = None,
) -> ErrorBudget:
    """Interval for ``log P(f(Y) >= tn)``.

    ``K_phi`` must be an upper bound on ``phi_p(t)`` (any feasible point's
    entropy).  The upper end needs a *lower* bound on ``phi_p(t - delta)``; the
    lower end needs an *upper* bound on ``phi_p(t + delta0)``.  ``certified``
    records, per input, whether it carries that guarantee.
    """
    budget = SmoothnessBudget.from_functional(f)
    eps0, delta0 = tail_lower_slack(budget, p)
    K = K_phi / f.n if math.isfinite(K_phi) else math.inf
    if not math.isfinite(K):
        raise DomainError("threshold unreachable: K is infinite")
    params = TailBudgetParams(p, t, delta, eps, K, net_size_log, budget)
    comp = tail_complexity_term(params, budget)
    smooth = tail_smoothness_term(params)
    upper = -phi_lower_at_t_minus_delta + comp + smooth
    lower = -phi_upper_at_t_plus_delta0 - eps0 * f.n - LOG2
    certified = dict(certified or {})
    if lower > upper:
        raise CertificateError(f"inconsistent inputs: lower {lower} exceeds upper {upper}")
    tb = params.tilted_budget()
    items = {
        "n": f.n,
        "p": p,
        "t": t,
        "delta": delta,
        "eps": eps,
        "K": K,
        "alpha": params.alpha,
        "net_radius": params.net_radius,
        "net_size_log": net_size_log,
        "complexity.beta_eps": 0.25 * math.sqrt(f.n * tb.sum_b2) * eps,
        "complexity.n_eps": 3.0 * f.n * eps,
        "complexity.log_grid": complexity_log_term(K, budget.sum_b2, f.n, delta, eps),
        "complexity.log_net": 0.0 if K == 0 else net_size_log,
        "smoothness.sqrt_part": 4.0 * math.sqrt(max(tb.sum_acb + 0.25 * (tb.a * tb.sum_c2 + tb.sum_bbc + 4.0 * tb.sum_bc), 0.0)),
        "smoothness.diag_product": 0.25 * math.sqrt(tb.sum_b2) * math.sqrt(tb.sum_cii2),
        "smoothness.diag_sum": 3.0 * tb.sum_cii,
        "smoothness.log2": LOG2,
        "phi_lower_at_t_minus_delta": phi_lower_at_t_minus_delta,
        "phi_upper_at_t_plus_delta0": phi_upper_at_t_plus_delta0,
        "eps0_n": eps0 * f.n,
        "certified": certified,
        # an upper-biased phi estimate weakens the lower end; a lower-biased one weakens the upper end
        "bias_note": "upper end uses a lower bound on phi; lower end uses an upper bound on phi",
    }
    return ErrorBudget(comp, smooth, eps0, delta0, lower, upper, items)


def free_energy_upper_terms(budget: SmoothnessBudget, eps: float, net_size_log: float) -> dict:
    """Complexity and smoothness terms of the free-energy upper bound."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    comp = 0.25 * math.sqrt(budget.n * budget.sum_b2) * eps + 3.0 * budget.n * eps + net_size_log
    smooth = smoothness_formula(budget)
    return {"complexity": comp, "smoothness": smooth, "total": comp + smooth}


def free_energy_lower_slack(budget: SmoothnessBudget) -> float:
    """``(1/2) sum_i c_ii``."""
    return 0.5 * budget.sum_cii


@dataclass(frozen=True)
class GraphExponents:
    b1: Fraction
    b2: Fraction
    b3: Fraction
    B1: Fraction
    B2: Fraction
    B3: Fraction

    def as_tuple(self):
        return (self.b1, self.b2, self.b3, self.B1, self.B2, self.B3)


def graphthm_exponents(H: GraphSpec) -> GraphExponents:
    k, m, D = H.k, H.m, H.max_degree
    if m < 1:
        raise DomainError("H needs an edge")
    return GraphExponents(
        Fraction(1),
        Fraction(1, 2 * m),
        Fraction(D),
        Fraction(9 + 8 * m, 5 + 8 * m),
        Fraction(1, 5 + 8 * m),
        Fraction(D) - Fraction(16 * m, k * (5 + 8 * m)),
    )


@dataclass(frozen=True)
class ShapeRates:
    """Rate expressions with every unknown constant set to 1; trends only."""

    lower: float
    upper: float
    label: str = "shape only (C = c = 1)"


def arith_error_rates(n: int, p: float) -> ShapeRates:
    if n <= 1 or not (0 < p <= 1):
        raise DomainError("need n > 1 and p in (0, 1]")
    ln = math.log(n)
    return ShapeRates(
        n ** (-1 / 6) * p**-6 * ln,
        n ** (-1 / 29) * p ** (-162 / 29) * ln ** (33 / 29),
    )


def ergm_bound(B: float, N: int) -> ShapeRates:
    """Shape of the window ``[-B/N, B^{8/5} N^{-1/5} (log N)^{1/5} (1 + log B / log N) + B^2 N^{-1/2}]``."""
    if B < 1 or N <= 1:
        raise DomainError("need B >= 1 and N > 1")
    lN = math.log(N)
    hi = B**1.6 * N**-0.2 * lN**0.2 * (1 + math.log(B) / lN) + B**2 * N**-0.5
    return ShapeRates(-B / N, hi)


def graph_epsilon_preset(N: int, theta: float) -> float:
    """``eps = N^{-1/5} theta^{3/5} (log N)^{4/5}``."""
    return N**-0.2 * theta**0.6 * math.log(N) ** 0.8


def bounded_difference_tail(budget: SmoothnessBudget, s: float) -> float:
    """``exp(-2 s^2 / sum_i b_i^2)`` bounds ``P(f(Y) >= E f(Y) + s)``.

    Changing coordinate i moves f by at most ``b_i`` (mean value theorem), so
    the bounded-difference inequality applies with ranges ``b_i``.
    """
    if s <= 0:
        raise DomainError("s must be positive")
    if budget.sum_b2 == 0:
        return 0.0
    return math.exp(-2.0 * s * s / budget.sum_b2)
