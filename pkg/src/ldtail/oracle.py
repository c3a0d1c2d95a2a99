"""Ground truth at desk scale: exact sums over {0,1}^n and seeded Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .bounds import SmoothnessBudget
from .entropy import bernoulli_parameter, check_point, cross_entropy_batch, sigmoid
from .errors import BudgetExceeded, DomainError
from .functionals.base import SmoothFunctional, all_binary_states
from .functionals.toys import CurieWeiss, Linear, LinearShift

DEFAULT_STATE_BUDGET = 25
CHUNK = 1 << 16
MC_CHUNK = 4096


def _tail_level(t: float, n: int) -> float:
    """Threshold with a relative tolerance for rounding in ``f``."""
    level = t * n
    return level - 1e-9 * max(1.0, abs(level))


@dataclass(frozen=True)
class GibbsMeasure:
    """Measure on {0,1}^n proportional to ``e^{f(x)}`` (times ``p^{|x|}(1-p)^{n-|x|}`` if tilted)."""

    f: SmoothFunctional
    p: float | None = None
    max_n: int = DEFAULT_STATE_BUDGET

    def __post_init__(self):
        if self.p is not None:
            bernoulli_parameter(self.p)

    @property
    def n(self) -> int:
        return self.f.n

    def hamiltonian(self) -> SmoothFunctional:
        """The full exponent as one functional (the tilt becomes a linear term)."""
        if self.p is None:
            return self.f
        return LinearShift(self.f, math.log(self.p) - math.log1p(-self.p))

    def log_base(self) -> float:
        return 0.0 if self.p is None else self.n * math.log1p(-self.p)

    def check_budget(self):
        if self.n > self.max_n:
            raise BudgetExceeded(f"exact enumeration of 2^{self.n} states exceeds the budget 2^{self.max_n}")


@dataclass(frozen=True)
class TailQuery:
    f: SmoothFunctional
    p: float
    t: float
    estimator: str = "exact"
    budget: int = 10_000
    seed: int = 0
    max_n: int = DEFAULT_STATE_BUDGET

    def __post_init__(self):
        bernoulli_parameter(self.p)
        if self.estimator not in ("exact", "iid-mc", "tilted-mc"):
            raise DomainError(f"unknown estimator {self.estimator!r}")


def _chunks(n: int, chunk: int = CHUNK):
    total = 1 << n
    for start in range(0, total, chunk):
        yield all_binary_states(n, start, min(start + chunk, total))


def enumerate_free_energy(g: GibbsMeasure) -> float:
    """``log sum_x exp(H(x))`` over all 2^n states, merged chunk by chunk in log space."""
    g.check_budget()
    H = g.hamiltonian()
    acc = -math.inf
    for X in _chunks(g.n):
        acc = np.logaddexp(acc, logsumexp(H.value_batch(X)))
    return float(acc) + g.log_base()


def _flip_deltas(f: SmoothFunctional):
    """Return ``step(x, i) -> f(x with bit i flipped) - f(x)`` with O(1) updates where available."""
    if isinstance(f, Linear):
        w = f.w
        return lambda x, i, state: w[i] * (1 - 2 * x[i])
    if isinstance(f, CurieWeiss):
        beta, n = f.beta, f.n

        def step(x, i, state):
            # Delta_i f = beta (S - x_i) / n, with S tracked in state
            d = beta * (state["S"] - x[i]) / n
            state["S"] += 1 - 2 * x[i]
            return d * (1 - 2 * x[i])

        return step

    def full(x, i, state):
        y = x.copy()
        y[i] = 1 - y[i]
        out = f.value(y) - state["v"]
        return out

    return full


def gray_code_free_energy(g: GibbsMeasure) -> float:
    """Same quantity as ``enumerate_free_energy`` via a reflected Gray-code walk with incremental updates."""
    g.check_budget()
    H = g.hamiltonian()
    base = H.base if isinstance(H, LinearShift) else H
    tilt = H.w if isinstance(H, LinearShift) else np.zeros(g.n)
    step = _flip_deltas(base)
    n = g.n
    x = np.zeros(n)
    v = base.value(x)
    state = {"S": 0.0, "v": v}
    m, s = v, 1.0  # running log-sum-exp as m + log(s)
    lin = 0.0
    for k in range(1, 1 << n):
        i = (k & -k).bit_length() - 1
        v += step(x, i, state)
        lin += tilt[i] * (1 - 2 * x[i])
        x[i] = 1 - x[i]
        state["v"] = v
        e = v + lin
        if e > m:
            s = s * math.exp(m - e) + 1.0
            m = e
        else:
            s += math.exp(e - m)
    return m + math.log(s) + g.log_base()


@dataclass
class TailResult:
    probability: float
    log_probability: float
    n_states: int
    hits: int


def enumerate_tail(q: TailQuery) -> TailResult:
    """``P(f(Y) >= tn)`` for i.i.d. Bernoulli(p) coordinates, summed exactly."""
    n = q.f.n
    if n > q.max_n:
        raise BudgetExceeded(f"exact enumeration of 2^{n} states exceeds the budget 2^{q.max_n}")
    level = _tail_level(q.t, n)
    lp, lq = math.log(q.p), math.log1p(-q.p)
    acc = -math.inf
    hits = 0
    for X in _chunks(n):
        keep = q.f.value_batch(X) >= level
        if keep.any():
            k = X[keep].sum(axis=1)
            acc = np.logaddexp(acc, logsumexp(k * lp + (n - k) * lq))
            hits += int(keep.sum())
    logp = float(acc)
    return TailResult(math.exp(logp) if hits else 0.0, logp, 1 << n, hits)


def glauber_conditional_mean(f: SmoothFunctional, x) -> np.ndarray:
    """``xhat_i = 1 / (1 + exp(-Delta_i f(x)))``, the conditional mean of X_i given the rest."""
    return sigmoid(f.discrete_gradient(check_point(x, f.n)))


@dataclass
class MeanFieldDiscrepancy:
    ED2: float
    EG2: float
    rhs1: float
    rhs2: float

    @property
    def slack1(self) -> float:
        return self.rhs1 - self.ED2

    @property
    def slack2(self) -> float:
        return self.rhs2 - self.EG2


def mean_field_discrepancy(g: GibbsMeasure, max_n: int = 20) -> MeanFieldDiscrepancy:
    """Exact ``E[(f(X) - f(Xhat))^2]`` and ``E[(sum (X_i - Xhat_i) Delta_i f(X))^2]`` with their bounds."""
    if g.n > max_n:
        raise BudgetExceeded(f"n = {g.n} exceeds {max_n}")
    H = g.hamiltonian()
    n = g.n
    X = all_binary_states(n)
    F = H.value_batch(X)
    codes = np.arange(1 << n)
    delta = np.empty((1 << n, n))
    for i in range(n):
        bit = 1 << i
        delta[:, i] = F[codes | bit] - F[codes & ~bit]
    Xhat = sigmoid(delta)
    D = F - H.value_batch(Xhat)
    G = ((X - Xhat) * delta).sum(axis=1)
    w = np.exp(F - F.max())
    w /= w.sum()
    budget = SmoothnessBudget.from_functional(H)
    rhs1 = budget.sum_acb + 0.25 * (budget.a * budget.sum_c2 + budget.sum_bbc)
    rhs2 = budget.sum_b2 + 0.25 * (budget.sum_bbc + 4.0 * budget.sum_bc)
    return MeanFieldDiscrepancy(float(w @ D**2), float(w @ G**2), rhs1, rhs2)


@dataclass
class MCResult:
    estimate: float
    stderr: float
    n_samples: int
    hits: int
    upper_confidence: float
    ess: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def _stream(seed: int, stream: int) -> np.random.Generator:
    # counter-based generator keyed by (seed, stream): chunks are reproducible in any order
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def _mc_chunks(budget: int):
    for c, start in enumerate(range(0, budget, MC_CHUNK)):
        yield c, min(MC_CHUNK, budget - start)


def iid_monte_carlo_tail(q: TailQuery) -> MCResult:
    """Plain frequency estimate of ``P(f(Y) >= tn)``; zero hits come with the 3/B upper bound."""
    if q.budget < 1000:
        raise DomainError("sample budget must be at least 1000")
    n = q.f.n
    level = _tail_level(q.t, n)
    hits = 0
    for c, size in _mc_chunks(q.budget):
        Y = (_stream(q.seed, c).random((size, n)) < q.p).astype(float)
        hits += int((q.f.value_batch(Y) >= level).sum())
    est = hits / q.budget
    se = math.sqrt(est * (1 - est) / q.budget)
    flags = []
    upper = est + 3 * se
    if hits == 0:
        flags.append("zero-hits")
        upper = 3.0 / q.budget
    return MCResult(est, se, q.budget, hits, upper, float(hits), flags)


def tilted_monte_carlo_tail(q: TailQuery, tilt) -> MCResult:
    """Importance sampling from independent Bernoulli(tilt_i) with weights ``exp(g(Y, p) - g(Y, tilt))``."""
    if q.budget < 1000:
        raise DomainError("sample budget must be at least 1000")
    n = q.f.n
    tilt = np.asarray(tilt, dtype=float)
    if tilt.shape != (n,) or np.any(tilt <= 0) or np.any(tilt >= 1):
        raise DomainError("tilt must lie strictly inside (0, 1)^n")
    level = _tail_level(q.t, n)
    pbar = np.full(n, q.p)
    s1 = s2 = 0.0
    hits = 0
    for c, size in _mc_chunks(q.budget):
        Y = (_stream(q.seed, c).random((size, n)) < tilt).astype(float)
        hit = q.f.value_batch(Y) >= level
        logw = cross_entropy_batch(Y, pbar) - cross_entropy_batch(Y, tilt)
        h = np.where(hit, np.exp(logw), 0.0)
        s1 += float(h.sum())
        s2 += float((h * h).sum())
        hits += int(hit.sum())
    B = q.budget
    est = s1 / B
    var = max(s2 / B - est * est, 0.0) * B / (B - 1)
    se = math.sqrt(var / B)
    ess = s1 * s1 / s2 if s2 > 0 else 0.0
    flags = []
    if ess < 10:
        flags.append("low-ess")
    upper = est + 3 * se
    if hits == 0:
        flags.append("zero-hits")
        upper = math.inf
    return MCResult(est, se, B, hits, upper, ess, flags)


def estimate_tail(q: TailQuery, tilt=None):
    if q.estimator == "exact":
        return enumerate_tail(q)
    if q.estimator == "iid-mc":
        return iid_monte_carlo_tail(q)
    if tilt is None:
        raise DomainError("tilted-mc needs a tilt vector")
    return tilted_monte_carlo_tail(q, tilt)
