import math
from fractions import Fraction

import numpy as np
import pytest

from ldtail.bounds import (
    SmoothnessBudget,
    TailBudgetParams,
    arith_error_rates,
    bounded_difference_tail,
    complexity_log_term,
    ergm_bound,
    free_energy_lower_slack,
    free_energy_upper_terms,
    graph_epsilon_preset,
    graphthm_exponents,
    smoothness_formula,
    tail_complexity_term,
    tail_lower_slack,
    tail_sandwich,
    tail_smoothness_term,
)
from ldtail.entropy import relative_entropy_scalar
from ldtail.errors import CertificateError, DomainError
from ldtail.functionals import (
    AP3,
    CurieWeiss,
    Ergm,
    ErgmSpec,
    GraphSpec,
    HomDensity,
    Linear,
    TiltedHamiltonian,
    ZeroPairBound,
)
from ldtail.oracle import TailQuery, enumerate_tail
from ldtail.variational import RateQuery


def loop_smoothness(n, a, b, c):
    """Second implementation of the smoothness display: plain double loops, different order."""
    s1 = 0.0
    for i in range(n):
        s1 += a * c[i][i] + b[i] * b[i]
    s2 = 0.0
    for j in reversed(range(n)):
        for i in reversed(range(n)):
            s2 += a * c[i][j] ** 2 + b[i] * b[j] * c[i][j] + 4 * b[i] * c[i][j]
    sb = math.sqrt(sum(v * v for v in b))
    sc = math.sqrt(sum(c[i][i] ** 2 for i in range(n)))
    return 4 * math.sqrt(s1 + s2 / 4) + 0.25 * sb * sc + 3 * sum(c[i][i] for i in range(n)) + math.log(2)


def loop_tail_terms(f, p, t, delta, eps, K, net_log):
    """Dense recomputation of alpha, beta, gamma and both error terms."""
    n = f.n
    b = list(f.bound_b)
    c = f.bound_c.dense().tolist()
    Cp = abs(math.log(p)) + abs(math.log(1 - p))
    alpha = n * K + n * Cp
    beta = [2 * K * b[i] / delta + Cp for i in range(n)]
    gamma = [[2 * K * c[i][j] / delta + 6 * K * b[i] * b[j] / (n * delta**2) for j in range(n)] for i in range(n)]
    sb2 = sum(v * v for v in b)
    R = 4 * K * math.sqrt(sb2 / n) / (delta * eps)
    log_grid = math.log(max(R, math.ceil(15 * R / 16), 1.0))
    comp = 0.25 * math.sqrt(n * sum(v * v for v in beta)) * eps + 3 * n * eps + log_grid + net_log
    smooth = loop_smoothness(n, alpha, beta, gamma)
    return comp, smooth


class TestSmoothnessBudget:
    @pytest.mark.parametrize(
        "f",
        [HomDensity(GraphSpec.triangle(), 6), AP3(17), CurieWeiss(11, 1.3), Ergm(ErgmSpec((GraphSpec.edge(), GraphSpec.triangle()), (0.4, -0.7)), 5)],
        ids=["triangle", "ap3", "cw", "ergm"],
    )
    def test_closed_forms_match_dense(self, f):
        bud = SmoothnessBudget.from_functional(f)
        C = f.bound_c.dense()
        b = np.asarray(f.bound_b)
        assert bud.sum_c2 == pytest.approx(float((C**2).sum()), rel=1e-12)
        assert bud.sum_bbc == pytest.approx(float(b @ C @ b), rel=1e-12)
        assert bud.sum_bc == pytest.approx(float((C @ np.ones(f.n)) @ b), rel=1e-12)
        assert bud.sum_cii == pytest.approx(float(np.trace(C)), rel=1e-12)
        assert smoothness_formula(bud) == pytest.approx(loop_smoothness(f.n, bud.a, b, C.tolist()), rel=1e-9)

    def test_all_zero_is_log2(self):
        bud = SmoothnessBudget(5, 3.0, np.zeros(5), ZeroPairBound(5))
        assert smoothness_formula(bud) == pytest.approx(math.log(2))


class TestTailTerms:
    def triangle_instance(self):
        f = HomDensity(GraphSpec.triangle(), 6)
        q = RateQuery.from_ratio(f, 0.3, 1.5)
        return f, q

    def test_dual_implementation(self):
        f, q = self.triangle_instance()
        K, net_log = 0.12, 7.5
        params = TailBudgetParams(0.3, q.t, 0.05, 0.05, K, net_log, SmoothnessBudget.from_functional(f))
        comp, smooth = loop_tail_terms(f, 0.3, q.t, 0.05, 0.05, K, net_log)
        assert tail_complexity_term(params) == pytest.approx(comp, rel=1e-9)
        assert tail_smoothness_term(params) == pytest.approx(smooth, rel=1e-9)

    def test_tilted_constants_agree_with_functional(self):
        f, q = self.triangle_instance()
        K, delta = 0.2, 0.05
        params = TailBudgetParams(0.3, q.t, delta, 0.1, K, 0.0, SmoothnessBudget.from_functional(f))
        g = TiltedHamiltonian(f, 0.3, q.t, delta, K)
        assert params.alpha == pytest.approx(g.bound_a)
        np.testing.assert_allclose(params.beta, g.bound_b)
        np.testing.assert_allclose(params.gamma.dense(), g.bound_c.dense())

    def test_net_size_is_additive(self):
        f, q = self.triangle_instance()
        bud = SmoothnessBudget.from_functional(f)
        a = tail_complexity_term(TailBudgetParams(0.3, q.t, 0.05, 0.05, 0.1, 4.0, bud))
        b = tail_complexity_term(TailBudgetParams(0.3, q.t, 0.05, 0.05, 0.1, 4.0 + math.log(2), bud))
        assert b - a == pytest.approx(math.log(2), abs=1e-12)

    def test_zero_gradient_guard(self):
        f = Linear(4, 0.0)
        bud = SmoothnessBudget.from_functional(f)
        params = TailBudgetParams(0.5, 0.1, 0.1, 0.2, 1.0, 0.0, bud)
        assert complexity_log_term(1.0, 0.0, 4, 0.1, 0.2) == 0.0
        assert tail_complexity_term(params) == pytest.approx(0.25 * math.sqrt(4 * float(params.beta @ params.beta)) * 0.2 + 3 * 4 * 0.2)

    def test_smoothness_all_zero(self):
        """With K = 0 and p = 1/2 nothing but the log 2 survives once beta is zero."""
        f = Linear(4, 0.0)
        bud = SmoothnessBudget.from_functional(f)
        params = TailBudgetParams(0.5, 0.1, 0.1, 0.2, 0.0, 0.0, bud)
        # beta = C_p is nonzero even here; compare to the dense loop instead
        assert tail_smoothness_term(params) == pytest.approx(loop_tail_terms(f, 0.5, 0.1, 0.1, 0.2, 0.0, 0.0)[1], rel=1e-12)

    def test_smoothness_monotone_in_gamma(self):
        f, q = self.triangle_instance()
        bud = SmoothnessBudget.from_functional(f)
        lo = tail_smoothness_term(TailBudgetParams(0.3, q.t, 0.05, 0.05, 0.1, 0.0, bud))
        hi = tail_smoothness_term(TailBudgetParams(0.3, q.t, 0.05, 0.05, 0.2, 0.0, bud))
        assert hi > lo

    def test_lower_slack(self):
        f = HomDensity(GraphSpec.triangle(), 6)
        bud = SmoothnessBudget.from_functional(f)
        eps0, delta0 = tail_lower_slack(bud, 0.5)
        assert eps0 == pytest.approx(4 / math.sqrt(15))
        c_ii = 24 / 6
        assert delta0 == pytest.approx(2 / 15 * math.sqrt(15 * (36 * c_ii + 36)))
        assert tail_lower_slack(SmoothnessBudget(3, 0.0, np.zeros(3), ZeroPairBound(3)), 0.3)[1] == 0.0

    def test_parameter_validation(self):
        bud = SmoothnessBudget.from_functional(Linear(2))
        with pytest.raises(DomainError):
            TailBudgetParams(0.3, 0.5, 0.0, 0.1, 1.0, 0.0, bud)
        with pytest.raises(DomainError):
            TailBudgetParams(0.3, 0.5, 0.1, 0.1, -1.0, 0.0, bud)


class TestTailSandwich:
    def test_contains_exact_tail_triangle(self):
        f = HomDensity(GraphSpec.triangle(), 6)
        q = RateQuery.from_ratio(f, 0.3, 1.5)
        exact = enumerate_tail(TailQuery(f, 0.3, q.t)).log_probability
        # phi inputs: a feasible point for K and phi(t + delta0); zero is a valid lower bound at t - delta
        eb = tail_sandwich(f, 0.3, q.t, 0.05, 0.05, K_phi=0.07, phi_lower_at_t_minus_delta=0.0,
                           phi_upper_at_t_plus_delta0=math.inf, net_size_log=15 * math.log(2))
        assert eb.contains(exact)
        assert set(eb.to_dict()["items"]) >= {"complexity.n_eps", "smoothness.log2", "eps0_n"}

    def test_typical_regime(self):
        f = Linear(10)
        eb = tail_sandwich(f, 0.5, 0.2, 0.05, 0.05, K_phi=0.0, phi_lower_at_t_minus_delta=0.0,
                           phi_upper_at_t_plus_delta0=0.0, net_size_log=0.0)
        exact = enumerate_tail(TailQuery(f, 0.5, 0.2)).log_probability
        assert eb.contains(exact) and exact == pytest.approx(0.0, abs=0.02)

    def test_widens_with_eps(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        kw = dict(K_phi=0.1, phi_lower_at_t_minus_delta=0.0, phi_upper_at_t_plus_delta0=math.inf, net_size_log=3.0)
        a = tail_sandwich(f, 0.3, 0.2, 0.05, 0.05, **kw)
        b = tail_sandwich(f, 0.3, 0.2, 0.05, 0.1, **kw)
        assert b.upper > a.upper and b.lower == a.lower

    def test_inconsistent_inputs(self):
        f = Linear(400)
        with pytest.raises(CertificateError):
            tail_sandwich(f, 0.5, 0.6, 0.01, 1e-4, K_phi=1e-6, phi_lower_at_t_minus_delta=1e6,
                          phi_upper_at_t_plus_delta0=0.0, net_size_log=0.0)

    def test_unreachable_K(self):
        with pytest.raises(DomainError):
            tail_sandwich(Linear(3), 0.5, 0.6, 0.1, 0.1, K_phi=math.inf, phi_lower_at_t_minus_delta=0.0,
                          phi_upper_at_t_plus_delta0=0.0, net_size_log=0.0)


class TestFreeEnergyTerms:
    def test_constant_functional(self):
        bud = SmoothnessBudget(6, 2.0, np.zeros(6), ZeroPairBound(6))
        up = free_energy_upper_terms(bud, 0.1, 2.0)
        assert up["total"] == pytest.approx(3 * 6 * 0.1 + 2.0 + math.log(2))
        assert free_energy_lower_slack(bud) == 0.0

    def test_curie_weiss_has_no_lower_slack(self):
        assert free_energy_lower_slack(SmoothnessBudget.from_functional(CurieWeiss(10, 2.0))) == 0.0

    def test_ergm_dual(self):
        f = Ergm(ErgmSpec((GraphSpec.triangle(),), (0.5,)), 6)
        bud = SmoothnessBudget.from_functional(f)
        up = free_energy_upper_terms(bud, 0.2, 5.0)
        b = list(f.bound_b)
        comp = 0.25 * math.sqrt(f.n * sum(v * v for v in b)) * 0.2 + 3 * f.n * 0.2 + 5.0
        smooth = loop_smoothness(f.n, f.bound_a, b, f.bound_c.dense().tolist())
        assert up["complexity"] == pytest.approx(comp, rel=1e-12)
        assert up["smoothness"] == pytest.approx(smooth, rel=1e-9)


class TestExponents:
    def test_triangle(self):
        e = graphthm_exponents(GraphSpec.triangle())
        assert e.B1 == Fraction(33, 29) and e.B2 == Fraction(1, 29)
        assert e.B3 == 2 - Fraction(48, 87)
        assert e.b1 == 1 and e.b2 == Fraction(1, 6) and e.b3 == 2
        assert all(isinstance(v, Fraction) for v in e.as_tuple())

    def test_edge(self):
        e = graphthm_exponents(GraphSpec.edge())
        assert e.b2 == Fraction(1, 2) and e.b3 == 1

    def test_shape_rates_vanish(self):
        ns = [10.0**k for k in (60, 120, 240, 300)]
        rates = [arith_error_rates(n, 0.5) for n in ns]
        assert all(b.lower < a.lower and b.upper < a.upper for a, b in zip(rates, rates[1:]))
        assert rates[-1].lower < 1e-40 and rates[-1].upper < 1e-5
        assert "shape only" in rates[0].label

    def test_ergm_b1(self):
        N = 1000
        r = ergm_bound(1.0, N)
        assert r.upper == pytest.approx(N**-0.2 * math.log(N) ** 0.2 + N**-0.5)
        assert r.lower == pytest.approx(-1 / N)

    def test_epsilon_preset(self):
        assert graph_epsilon_preset(100, 1.0) == pytest.approx(100**-0.2 * math.log(100) ** 0.8)


class TestBoundedDifference:
    def test_small_s(self):
        bud = SmoothnessBudget.from_functional(Linear(10))
        assert bounded_difference_tail(bud, 1e-9) == pytest.approx(1.0)

    def test_dominates_exact_binomial(self):
        n, p = 20, 0.3
        f = Linear(n)
        bud = SmoothnessBudget.from_functional(f)
        for s in (1.0, 2.5, 4.0, 7.0):
            exact = math.exp(enumerate_tail(TailQuery(f, p, (n * p + s) / n)).log_probability)
            assert bounded_difference_tail(bud, s) >= exact

    def test_ap3_against_monte_carlo(self):
        from ldtail.oracle import iid_monte_carlo_tail

        f = AP3(50)
        mean = f.mean(0.5)
        s = 0.2 * mean
        mc = iid_monte_carlo_tail(TailQuery(f, 0.5, (mean + s) / 50, "iid-mc", 20_000, 3))
        assert bounded_difference_tail(SmoothnessBudget.from_functional(f), s) >= mc.estimate + 3 * mc.stderr
