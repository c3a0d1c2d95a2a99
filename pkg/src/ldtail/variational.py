"""Rate-function and mean-field variational problems on the hypercube.

``solve_rate`` returns the best *feasible* point found, so its value is always
an upper bound on the true infimum.  ``rate_lower_bound`` and
``grid_oracle_rate`` supply certified lower bounds; ``planted_*`` give explicit
constructions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .entropy import (
    bernoulli_parameter,
    logit,
    relative_entropy_derivative,
    relative_entropy_terms,
    relative_entropy_vector,
    shannon_neg_entropy,
    sigmoid,
)
from .errors import BudgetExceeded, DomainError
from .functionals.ap3 import AP3
from .functionals.base import SmoothFunctional
from .functionals.graphs import GraphSpec, HomDensity

CLAMP = 1e-12
STATUSES = ("converged", "max-iter", "infeasible")


@dataclass(frozen=True)
class RateQuery:
    """``inf { I_p(x) : f(x) >= t n }``."""

    functional: SmoothFunctional
    p: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "p", bernoulli_parameter(self.p))

    @classmethod
    def from_ratio(cls, f: SmoothFunctional, p: float, u: float) -> "RateQuery":
        """Threshold ``t = u E f(Y) / n``."""
        if u <= 1:
            raise DomainError("the ratio u must exceed 1")
        return cls(f, p, u * f.mean(p) / f.n)

    @property
    def n(self) -> int:
        return self.functional.n

    @property
    def level(self) -> float:
        return self.t * self.functional.n

    def with_t(self, t: float) -> "RateQuery":
        return RateQuery(self.functional, self.p, t)


@dataclass
class VariationalResult:
    value: float
    optimizer: np.ndarray
    status: str
    kkt_residual: float
    multistart_spread: float
    start_values: list = field(default_factory=list)
    multiplier: float = 0.0

    def to_dict(self, include_optimizer: bool = False) -> dict:
        out = {
            "value": self.value,
            "status": self.status,
            "kkt_residual": self.kkt_residual,
            "multistart_spread": self.multistart_spread,
            "multiplier": self.multiplier,
            "n_starts": len(self.start_values),
        }
        if include_optimizer:
            out["optimizer"] = self.optimizer.tolist()
        return out


@dataclass
class SolverOptions:
    n_random: int = 16
    seed: int = 0
    max_outer: int = 25
    max_inner: int = 400
    tol: float = 1e-9
    threads: int = 1
    extra_starts: tuple = ()
    # mean-field iteration
    damping: float = 0.5
    max_iter: int = 5000
    mf_tol: float = 1e-9


def _pick_best(candidates):
    """Lowest value; ties (relative 1e-10) broken by the lexicographically smallest point."""
    if not candidates:
        return None
    vmin = min(v for v, _ in candidates)
    tied = [(v, x) for v, x in candidates if v <= vmin + 1e-10 * max(1.0, abs(vmin))]
    return min(tied, key=lambda vx: tuple(np.round(vx[1], 12)))


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _feasibility_polish(f, x, level, anchor):
    """Move from x toward a feasible ``anchor`` until ``f >= level``; bisection on the segment."""
    if f.value(x) >= level:
        return x
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f.value(x + mid * (anchor - x)) >= level:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    return np.clip(x + hi * (anchor - x), 0.0, 1.0)


def _kkt(f, p, x, level):
    g = f.grad(x)
    interior = (x > 1e-9) & (x < 1 - 1e-9)
    d = relative_entropy_derivative(np.clip(x, CLAMP, 1 - CLAMP), p)
    if interior.any() and np.any(g[interior] != 0):
        gi = g[interior]
        lam = max(0.0, float(d[interior] @ gi / (gi @ gi)))
    else:
        lam = 0.0
    r = d - lam * g
    res = np.where(interior, np.abs(r), 0.0)
    # at x = 1 the residual may be negative, at x = 0 positive
    res = np.where(x >= 1 - 1e-9, np.maximum(r, 0.0), res)
    res = np.where(x <= 1e-9, np.maximum(-r, 0.0), res)
    comp = abs(lam * (f.value(x) - level)) / max(1.0, abs(level))
    return float(max(res.max(initial=0.0), comp)), lam


def _augmented_lagrangian(f, p, level, x0, opts):
    scale = max(1.0, abs(level))
    lam, mu = 0.0, 10.0
    x = np.clip(np.asarray(x0, dtype=float), CLAMP, 1 - CLAMP)
    prev = math.inf
    converged = False
    lp, lq = math.log(p), math.log1p(-p)

    for _ in range(opts.max_outer):

        def obj(z, lam=lam, mu=mu):
            fz = f.value(z)
            c = (level - fz) / scale
            s = max(0.0, lam + mu * c)
            val = float(relative_entropy_terms(z, p).sum()) + (s * s - lam * lam) / (2 * mu)
            gI = np.log(z) - np.log1p(-z) + (lq - lp)
            return val, gI - s * f.grad(z) / scale

        res = minimize(
            obj,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=[(CLAMP, 1 - CLAMP)] * f.n,
            options={"maxiter": opts.max_inner, "ftol": 1e-15, "gtol": 1e-10},
        )
        x = res.x
        c = (level - f.value(x)) / scale
        lam = max(0.0, lam + mu * c)
        if c <= opts.tol:
            converged = True
            if abs(c) <= 1e-7 or lam == 0.0:
                break
        if c > 0.25 * prev:
            mu = min(mu * 10.0, 1e10)
        prev = max(c, 0.0)
    return x, converged


def solve_rate(q: RateQuery, opts: SolverOptions | None = None) -> VariationalResult:
    """Best feasible point over multistarts for ``inf { I_p(x) : f(x) >= tn }``."""
    opts = opts or SolverOptions()
    f, p, n, level = q.functional, q.p, q.n, q.level
    pbar = np.full(n, p)
    ones = np.ones(n)

    if f.value(pbar) >= level:
        return VariationalResult(0.0, pbar, "converged", 0.0, 0.0, [0.0])

    anchor = ones if f.value(ones) >= level else None
    if anchor is None:
        if f.monotone:
            return VariationalResult(math.inf, ones, "infeasible", math.inf, 0.0)
        # look for any feasible point by maximizing f from a few starts
        best = None
        rng = np.random.default_rng(opts.seed)
        for s in [pbar, ones, *rng.uniform(size=(4, n))]:
            r = minimize(lambda z: (-f.value(z), -f.grad(z)), s, jac=True, method="L-BFGS-B", bounds=[(0, 1)] * n)
            if best is None or -r.fun > best[0]:
                best = (-r.fun, r.x)
        if best[0] < level:
            return VariationalResult(math.inf, best[1], "infeasible", math.inf, 0.0)
        anchor = best[1]

    rng = np.random.default_rng(opts.seed)
    starts = [pbar, np.full(n, 1 - 1e-6), *[np.asarray(s, dtype=float) for s in opts.extra_starts]]
    starts += list(rng.uniform(size=(opts.n_random, n)))

    def run(x0):
        x, ok = _augmented_lagrangian(f, p, level, x0, opts)
        x = _feasibility_polish(f, x, level, anchor)
        out = [(relative_entropy_vector(x, p), x, ok)]
        if f.value(x0) >= level:
            out.append((relative_entropy_vector(x0, p), np.asarray(x0, dtype=float), True))
        return out

    runs = _map(run, starts, opts.threads)
    candidates = [(v, x) for r in runs for v, x, _ in r if f.value(x) >= level]
    all_ok = all(ok for r in runs for _, _, ok in r[:1])
    best_v, best_x = _pick_best(candidates)
    per_start = [min(v for v, _, _ in r) for r in runs]
    kkt, lam = _kkt(f, p, best_x, level)
    spread = float(max(per_start) - min(per_start))
    return VariationalResult(
        value=float(best_v),
        optimizer=best_x,
        status="converged" if all_ok or kkt < 1e-4 else "max-iter",
        kkt_residual=kkt,
        multistart_spread=spread,
        start_values=per_start,
        multiplier=lam,
    )


def solve_rate_curve(f: SmoothFunctional, p: float, ts, opts: SolverOptions | None = None) -> list[VariationalResult]:
    """Solve at each threshold, sweeping downward so each optimizer seeds the next (lower) threshold."""
    opts = opts or SolverOptions()
    order = np.argsort(ts)[::-1]
    out: dict[int, VariationalResult] = {}
    carry: list = []
    for idx in order:
        local = SolverOptions(**{**opts.__dict__, "extra_starts": tuple(opts.extra_starts) + tuple(carry)})
        res = solve_rate(RateQuery(f, p, float(ts[idx])), local)
        out[int(idx)] = res
        if res.status != "infeasible":
            carry = [res.optimizer]
    return [out[i] for i in range(len(ts))]


@dataclass
class RateBound:
    value: float
    method: str
    detail: dict = field(default_factory=dict)


def rate_lower_bound(f: SmoothFunctional, p: float, t: float) -> RateBound:
    """Certified lower bound on ``phi_p(t)`` from a convex relaxation.

    Uses ``f(x) <= f(p) + sum_i b_i (x_i - p)_+`` for monotone f (and
    ``|x_i - p|`` otherwise).  For monotone f the relaxed problem is solved by
    weak duality, so any multiplier gives a valid bound; otherwise Pinsker's
    inequality ``I_p(u) >= 2 (u - p)^2`` gives ``2 D^2 / sum b_i^2``.
    """
    p = bernoulli_parameter(p)
    n = f.n
    b = np.asarray(f.bound_b, dtype=float)
    deficit = t * n - f.value(np.full(n, p))
    if deficit <= 0:
        return RateBound(0.0, "typical", {"deficit": deficit})
    if not f.monotone:
        bb = float(b @ b)
        if bb == 0 or deficit > float(b.sum()) * max(p, 1 - p):
            return RateBound(math.inf, "unreachable", {"deficit": deficit})
        return RateBound(2 * deficit**2 / bb, "pinsker", {"deficit": deficit})
    if deficit > float(b.sum()) * (1 - p):
        return RateBound(math.inf, "unreachable", {"deficit": deficit})

    active = b > 0
    bA = b[active]
    lp = logit(p)

    def y_of(lam):
        return np.minimum(1.0, sigmoid(lp + lam * bA))

    def reach(lam):
        return float(bA @ (y_of(lam) - p)) - deficit

    def dual(lam):
        y = np.clip(y_of(lam), p, 1.0)
        return float(relative_entropy_terms(y, p).sum()) - lam * (float(bA @ (y - p)) - deficit)

    hi = 1.0
    while reach(hi) < 0 and hi < 1e6:
        hi *= 2.0
    if reach(hi) < 0:
        # the relaxed constraint needs y = 1 on every active coordinate
        return RateBound(float(relative_entropy_terms(np.ones(bA.size), p).sum()), "saturated")
    lam = brentq(reach, 0.0, hi, xtol=1e-14)
    value = max(dual(lam), dual(lam * (1 - 1e-9)))
    return RateBound(value, "linear-relaxation", {"multiplier": lam, "deficit": deficit})


@dataclass
class GridOracleResult:
    upper: float
    lower: float
    slack: float
    point: np.ndarray | None
    n_points: int


def grid_oracle_rate(
    q: RateQuery, resolution: int = 40, budget: int = 5_000_000, symmetric: bool = False
) -> GridOracleResult:
    """Exhaustive search over a product grid that contains ``p``.

    ``upper`` minimizes over grid points with ``f >= tn``; ``lower`` relaxes the
    constraint by ``sum_i b_i h`` (h = largest grid gap).  Rounding any feasible
    point toward p lands on the grid, can only lower ``I_p`` and moves f by at
    most that slack, so ``lower <= phi_p(t)``.  With ``symmetric=True`` only
    constant points are scanned.
    """
    f, p, n, level = q.functional, q.p, q.n, q.level
    grid = np.union1d(np.linspace(0.0, 1.0, resolution + 1), [p])
    h = float(np.diff(grid).max())
    slack = float(np.sum(f.bound_b)) * h
    costs = relative_entropy_terms(grid, p)

    if symmetric:
        if not f.permutation_invariant:
            raise DomainError("symmetric reduction needs a permutation-invariant functional")
        X = np.repeat(grid[:, None], n, axis=1)
        vals = f.value_batch(X)
        I = n * costs
        up = np.where(vals >= level, I, np.inf)
        lo = np.where(vals >= level - slack, I, np.inf)
        k = int(np.argmin(up))
        return GridOracleResult(float(up.min()), float(lo.min()), slack, X[k] if np.isfinite(up[k]) else None, grid.size)

    total = grid.size**n
    if total > budget:
        raise BudgetExceeded(f"grid of {total} points exceeds budget {budget}")
    best_up, best_lo, best_pt = math.inf, math.inf, None
    chunk = 200_000
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = np.empty((idx.size, n), dtype=np.int64)
        rest = idx.copy()
        for i in range(n):
            digits[:, i] = rest % grid.size
            rest //= grid.size
        I = costs[digits].sum(axis=1)
        X = grid[digits]
        vals = f.value_batch(X)
        up = np.where(vals >= level, I, np.inf)
        lo = np.where(vals >= level - slack, I, np.inf)
        k = int(np.argmin(up))
        if up[k] < best_up:
            best_up, best_pt = float(up[k]), X[k]
        best_lo = min(best_lo, float(lo.min()))
    return GridOracleResult(best_up, best_lo, slack, best_pt, total)


def _mean_field_run(f, x0, opts):
    x = np.clip(np.asarray(x0, dtype=float), CLAMP, 1 - CLAMP)
    eta = opts.damping
    prev = math.inf
    bumps = 0
    for _ in range(opts.max_iter):
        y = sigmoid(f.grad(x))
        r = float(np.abs(x - y).max())
        if r < opts.mf_tol:
            break
        if r > prev:
            bumps += 1
            if bumps >= 3:
                eta *= 0.5
                bumps = 0
        prev = r
        x = np.clip((1 - eta) * x + eta * y, CLAMP, 1 - CLAMP)
        if eta < 1e-6:
            break

    # ascent in logit coordinates
    zmax = -math.log(CLAMP)

    def neg(z):
        u = np.clip(sigmoid(z), CLAMP, 1 - CLAMP)
        val = f.value(u) - shannon_neg_entropy(u)
        g = (f.grad(u) - logit(u)) * u * (1 - u)
        return -val, -g

    res = minimize(neg, np.clip(logit(x), -zmax, zmax), jac=True, method="L-BFGS-B",
                   bounds=[(-zmax, zmax)] * f.n, options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12})
    x = np.clip(sigmoid(res.x), CLAMP, 1 - CLAMP)
    # finish with undamped fixed-point steps while they do not lose value
    for _ in range(200):
        y = np.clip(sigmoid(f.grad(x)), CLAMP, 1 - CLAMP)
        if np.abs(x - y).max() < opts.mf_tol or _mf_value(f, y) < _mf_value(f, x) - 1e-14:
            break
        x = y
    return x


def _mf_value(f, x):
    return f.value(x) - shannon_neg_entropy(x)


def mean_field_residual(f: SmoothFunctional, x) -> float:
    """``|| x - sigma(grad f(x)) ||_inf``; zero exactly at stationary points of ``f - I``."""
    return float(np.abs(np.asarray(x) - sigmoid(f.grad(x))).max())


def solve_mean_field(f: SmoothFunctional, opts: SolverOptions | None = None) -> VariationalResult:
    """Best stationary point of ``f(x) - I(x)`` over multistarts (a lower estimate of the sup)."""
    opts = opts or SolverOptions()
    n = f.n
    rng = np.random.default_rng(opts.seed)
    starts = [np.full(n, 0.5), np.full(n, 0.1), np.full(n, 0.9), *[np.asarray(s, float) for s in opts.extra_starts]]
    starts += list(rng.uniform(size=(opts.n_random, n)))
    xs = _map(lambda s: _mean_field_run(f, s, opts), starts, opts.threads)
    vals = [_mf_value(f, x) for x in xs]
    # maximize value: reuse the minimizing tie-break on negated values
    best_negv, best_x = _pick_best([(-v, x) for v, x in zip(vals, xs)])
    resid = mean_field_residual(f, best_x)
    return VariationalResult(
        value=float(-best_negv),
        optimizer=best_x,
        status="converged" if resid <= 1e-6 else "max-iter",
        kkt_residual=resid,
        multistart_spread=float(max(vals) - min(vals)),
        start_values=vals,
    )


def mean_field_symmetric_scan(f: SmoothFunctional, resolution: int = 2000) -> tuple[float, float]:
    """``max_u f(u,...,u) - n I(u)`` by a grid scan refined with a bounded scalar search.

    Returns ``(value, u)``.
    """
    if not f.permutation_invariant:
        raise DomainError("symmetric scan needs a permutation-invariant functional")
    n = f.n
    grid = np.linspace(0.0, 1.0, resolution + 1)
    X = np.repeat(grid[:, None], n, axis=1)
    vals = f.value_batch(X) - n * np.array([shannon_neg_entropy(u) for u in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, resolution)]

    def neg(u):
        return -(f.value(np.full(n, u)) - n * shannon_neg_entropy(u))

    r = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -r.fun >= vals[k]:
        return float(-r.fun), float(r.x)
    return float(vals[k]), float(grid[k])


@dataclass
class EnvelopeReport:
    worst_margin: float
    worst_monotonicity: float
    violations: list
    pairs_checked: int

    def ok(self, tol: float = 1e-3) -> bool:
        return self.worst_margin >= -tol and self.worst_monotonicity >= -tol


def rate_lipschitz_envelope(ts, phis, m: float, t0: float, p: float, n: int, tol: float = 1e-3) -> EnvelopeReport:
    """Check ``phi(t - d) >= phi(t) - (d / (t0 - t))^{1/m} n log(1/p)`` on adjacent samples.

    Also checks that the samples are nondecreasing in t.  Pairs with
    ``t >= t0`` are outside the envelope's range and skipped.
    """
    ts = np.asarray(ts, dtype=float)
    phis = np.asarray(phis, dtype=float)
    order = np.argsort(ts)
    ts, phis = ts[order], phis[order]
    worst, worst_mono = math.inf, math.inf
    violations = []
    checked = 0
    scale = n * math.log(1 / p)
    for a, b in zip(range(len(ts) - 1), range(1, len(ts))):
        d = ts[b] - ts[a]
        mono = phis[b] - phis[a]
        worst_mono = min(worst_mono, mono)
        if not (0 < d and ts[b] < t0) or not np.isfinite(phis[b]):
            continue
        checked += 1
        margin = phis[a] - (phis[b] - (d / (t0 - ts[b])) ** (1.0 / m) * scale)
        worst = min(worst, margin)
        if margin < -tol or mono < -tol:
            violations.append({"t_lo": ts[a], "t_hi": ts[b], "margin": margin, "monotone": mono})
    return EnvelopeReport(worst if checked else math.inf, worst_mono, violations, checked)


@dataclass
class PlantedResult:
    point: np.ndarray
    value: float
    size: int
    f_value: float
    bound: float


def planted_clique_upper(H: GraphSpec, N: int, p: float, t: float) -> PlantedResult:
    """Plant a clique on the first ``r = ceil(t^{1/k} N) + k`` vertices, p elsewhere."""
    p = bernoulli_parameter(p)
    r = math.ceil(t ** (1.0 / H.k) * N - 1e-12) + H.k if t > 0 else H.k
    if r > N:
        raise DomainError(f"planted clique of size {r} does not fit in {N} vertices")
    return _plant_clique(H, N, p, t, r)


def minimal_planted_clique(H: GraphSpec, N: int, p: float, t: float) -> PlantedResult | None:
    """Smallest planted clique that is feasible; ``None`` if even ``r = N`` fails."""
    p = bernoulli_parameter(p)
    T = HomDensity(H, N)
    for r in range(2, N + 1):
        res = _plant_clique(H, N, p, t, r, T)
        if res.f_value >= t * T.n:
            return res
    return None


def _plant_clique(H, N, p, t, r, T=None):
    T = T or HomDensity(H, N)
    M = np.full((N, N), p)
    M[:r, :r] = 1.0
    x = M[np.triu_indices(N, 1)]
    fv = T.value(x)
    if fv < t * T.n:
        raise DomainError(f"planted point misses the threshold ({fv} < {t * T.n})")
    planted = r * (r - 1) // 2
    value = planted * math.log(1 / p)
    return PlantedResult(x, value, r, fv, 0.5 * r * r * math.log(1 / p))


def planted_interval_upper_ap3(n: int, p: float, t: float) -> PlantedResult:
    """First ``ceil(3 t^{1/2} n)`` coordinates set to 1, the rest to p."""
    p = bernoulli_parameter(p)
    L = math.ceil(3 * math.sqrt(t) * n - 1e-12) if t > 0 else 0
    if L > n:
        raise DomainError(f"planted interval of length {L} exceeds n = {n}")
    x = np.full(n, p)
    x[:L] = 1.0
    fv = AP3(n).value(x)
    if fv < t * n:
        raise DomainError(f"planted interval misses the threshold ({fv} < {t * n})")
    value = L * math.log(1 / p)
    return PlantedResult(x, value, L, fv, value)


def lz_closed_form(delta) -> float:
    """``min(delta^{2/3} / 2, delta / 3)``."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise DomainError("delta must be positive")
    out = np.minimum(np.cbrt(delta) ** 2 / 2.0, delta / 3.0)
    return float(out) if out.ndim == 0 else out


def superposition_check(a, b: float) -> float:
    """Margin of ``prod(a_i + b(1 - a_i)) >= (1 - b^r) prod(a_i) + b^r``."""
    a = np.asarray(a, dtype=float)
    if np.any((a < 0) | (a > 1)) or not (0 <= b <= 1):
        raise DomainError("inputs must lie in [0, 1]")
    r = a.size
    lhs = float(np.prod(a + b * (1 - a)))
    rhs = (1 - b**r) * float(np.prod(a)) + b**r
    return lhs - rhs
