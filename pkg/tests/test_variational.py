import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldtail.entropy import relative_entropy_scalar, relative_entropy_vector, sigmoid
from ldtail.errors import BudgetExceeded, DomainError
from ldtail.functionals import AP3, Chain, CurieWeiss, GraphSpec, HomDensity, Linear, TableFunctional
from ldtail.variational import (
    RateQuery,
    SolverOptions,
    grid_oracle_rate,
    lz_closed_form,
    mean_field_residual,
    mean_field_symmetric_scan,
    minimal_planted_clique,
    planted_clique_upper,
    planted_interval_upper_ap3,
    rate_lipschitz_envelope,
    rate_lower_bound,
    solve_mean_field,
    solve_rate,
    solve_rate_curve,
    superposition_check,
)

FAST = SolverOptions(n_random=4)


class TestRateQuery:
    def test_ratio(self):
        f = Linear(4)
        q = RateQuery.from_ratio(f, 0.25, 2.0)
        assert q.t == pytest.approx(0.5)
        assert q.level == pytest.approx(2.0)

    def test_rejects(self):
        with pytest.raises(DomainError):
            RateQuery.from_ratio(Linear(3), 0.3, 1.0)
        with pytest.raises(DomainError):
            RateQuery(Linear(3), 1.0, 0.5)


class TestSolveRate:
    @pytest.mark.parametrize("t", [0.35, 0.6, 0.95, 1.0])
    def test_linear_is_product_form(self, t):
        """phi_p(t) = n I_p(t) for f = sum x_i."""
        n, p = 6, 0.3
        r = solve_rate(RateQuery(Linear(n), p, t), FAST)
        assert r.value == pytest.approx(n * relative_entropy_scalar(t, p), abs=1e-6)
        assert r.status == "converged"

    def test_linear_matches_grid_at_n2(self):
        q = RateQuery(Linear(2), 0.5, 0.8)
        g = grid_oracle_rate(q, resolution=40)
        r = solve_rate(q, FAST)
        assert g.lower - 1e-12 <= r.value <= g.upper + 1e-12
        assert g.upper == pytest.approx(2 * relative_entropy_scalar(0.8, 0.5), abs=1e-12)

    def test_typical_threshold_is_zero(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        r = solve_rate(RateQuery(f, 0.3, 0.5 * f.value(np.full(f.n, 0.3)) / f.n))
        assert r.value == 0.0
        np.testing.assert_array_equal(r.optimizer, 0.3)

    def test_infeasible(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        r = solve_rate(RateQuery(f, 0.3, 1.1 * f.value(np.ones(f.n)) / f.n))
        assert r.status == "infeasible" and r.value == math.inf

    def test_triangle_n5_against_grid_certificates(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        q = RateQuery.from_ratio(f, 0.3, 1.5)
        r = solve_rate(q)
        assert f.value(r.optimizer) >= q.level - 1e-8 * f.n
        assert r.value == pytest.approx(relative_entropy_vector(r.optimizer, 0.3), abs=1e-9)
        lo = rate_lower_bound(f, 0.3, q.t).value
        planted = minimal_planted_clique(f.H, 5, 0.3, q.t).value
        assert lo <= r.value <= planted

    def test_monotone_in_t(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        ts = np.linspace(0.05, 0.4, 6)
        vals = [r.value for r in solve_rate_curve(f, 0.3, ts, FAST)]
        assert np.all(np.diff(vals) >= -1e-9)

    def test_more_starts_never_worse(self):
        f = AP3(9)
        q = RateQuery.from_ratio(f, 0.3, 1.8)
        few = solve_rate(q, SolverOptions(n_random=2, seed=5))
        many = solve_rate(q, SolverOptions(n_random=2, seed=5, extra_starts=tuple(np.random.default_rng(9).uniform(size=(4, 9)))))
        assert many.value <= few.value + 1e-12

    def test_deterministic_under_threads(self):
        f = Chain(6)
        q = RateQuery(f, 0.4, 0.5)
        a = solve_rate(q, SolverOptions(n_random=6, threads=1))
        b = solve_rate(q, SolverOptions(n_random=6, threads=3))
        assert a.value == b.value
        np.testing.assert_array_equal(a.optimizer, b.optimizer)


class TestGridOracle:
    def test_one_dimensional(self):
        g = grid_oracle_rate(RateQuery(Linear(1), 0.5, 0.9), resolution=40)
        assert g.upper == pytest.approx(relative_entropy_scalar(0.9, 0.5), abs=1e-12)
        np.testing.assert_allclose(g.point, [0.9])

    def test_refinement(self):
        q = RateQuery(Chain(3), 0.3, 0.5)
        coarse = grid_oracle_rate(q, resolution=40)
        fine = grid_oracle_rate(q, resolution=80)
        assert fine.upper <= coarse.upper + coarse.slack
        assert fine.lower <= fine.upper

    def test_symmetric_curie_weiss_scalar(self):
        f = CurieWeiss(6, 2.0)
        q = RateQuery(f, 0.3, 0.6)
        g = grid_oracle_rate(q, resolution=2000, symmetric=True)
        # scalar minimization of n I_p(u) subject to beta u^2 (n-1)/2 >= t n
        u_star = math.sqrt(q.level / (2.0 * (6 - 1) / 2))
        assert g.upper == pytest.approx(6 * relative_entropy_scalar(u_star, 0.3), rel=2e-3)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            grid_oracle_rate(RateQuery(Linear(8), 0.3, 0.5), resolution=40)


class TestRateLowerBound:
    @given(st.floats(min_value=0.32, max_value=0.99))
    def test_below_linear_exact(self, t):
        f = Linear(5)
        assert rate_lower_bound(f, 0.3, t).value <= 5 * relative_entropy_scalar(t, 0.3) + 1e-9

    def test_below_grid_oracle(self, rng):
        for _ in range(4):
            f = TableFunctional.random(3, rng)
            t = (f.value(np.full(3, 0.4)) + 0.3) / 3
            if f.value(np.ones(3)) < t * 3:
                continue
            g = grid_oracle_rate(RateQuery(f, 0.4, t))
            assert rate_lower_bound(f, 0.4, t).value <= g.upper + 1e-12


class TestMeanField:
    def test_linear_closed_form(self):
        c, n = 0.8, 7
        r = solve_mean_field(Linear(n, c))
        assert r.value == pytest.approx(n * math.log1p(math.exp(c)), abs=1e-9)
        np.testing.assert_allclose(r.optimizer, sigmoid(c), atol=1e-8)

    def test_zero_functional(self):
        r = solve_mean_field(Linear(5, 0.0))
        assert r.value == pytest.approx(5 * math.log(2), abs=1e-12)
        np.testing.assert_allclose(r.optimizer, 0.5, atol=1e-9)

    @pytest.mark.parametrize("beta", [0.5, 2.0, 4.0, 6.0])
    def test_curie_weiss_matches_scan(self, beta):
        f = CurieWeiss(20, beta)
        r = solve_mean_field(f)
        scan, _ = mean_field_symmetric_scan(f)
        assert r.value == pytest.approx(scan, abs=1e-4)
        assert r.status == "converged"
        assert mean_field_residual(f, r.optimizer) <= 1e-6

    def test_multistart_beats_single_start(self):
        f = CurieWeiss(20, 6.0)
        best = solve_mean_field(f, SolverOptions(n_random=0))
        assert best.value >= max(best.start_values) - 1e-12

    def test_permutation_invariance(self, rng):
        f = CurieWeiss(12, 3.0)
        a = solve_mean_field(f, SolverOptions(n_random=3, seed=1)).value
        b = solve_mean_field(f, SolverOptions(n_random=3, seed=2)).value
        assert a == pytest.approx(b, abs=1e-8)


class TestEnvelope:
    def test_flat_region(self):
        rep = rate_lipschitz_envelope([0.1, 0.2, 0.3], [0.0, 0.0, 0.0], 3, 1.0, 0.3, 10)
        assert rep.ok()

    def test_detects_violation(self):
        rep = rate_lipschitz_envelope([0.1, 0.2], [0.0, 50.0], 3, 1.0, 0.3, 10)
        assert not rep.ok() and rep.violations

    def test_triangle_curve(self):
        f = HomDensity(GraphSpec.triangle(), 5)
        t0 = f.value(np.ones(f.n)) / f.n
        ts = np.linspace(0.1, 0.9, 8) * t0
        phis = [r.value for r in solve_rate_curve(f, 0.3, ts, FAST)]
        rep = rate_lipschitz_envelope(ts, phis, f.H.m, t0, 0.3, f.n)
        assert rep.ok(1e-3)


class TestPlanted:
    def test_t_zero(self):
        res = planted_clique_upper(GraphSpec.triangle(), 8, 0.3, 0.0)
        assert res.size == 3
        assert res.value <= 0.5 * 9 * math.log(1 / 0.3)

    def test_triangle_r6(self):
        N, k = 10, 3
        t = ((6 - k) / N) ** k * 0.999
        res = planted_clique_upper(GraphSpec.triangle(), N, 0.3, t)
        assert res.size == 6
        T = HomDensity(GraphSpec.triangle(), N)
        assert T.value(res.point) >= t * T.n
        assert res.value == pytest.approx(15 * math.log(1 / 0.3), abs=1e-12)
        assert res.value == pytest.approx(relative_entropy_vector(res.point, 0.3), abs=1e-10)

    def test_too_large(self):
        with pytest.raises(DomainError):
            planted_clique_upper(GraphSpec.triangle(), 5, 0.3, 0.9)

    def test_ap3_interval(self):
        res = planted_interval_upper_ap3(100, 0.3, 0.01)
        assert res.size == 30
        assert AP3(100).value(res.point) >= 0.01 * 100
        assert res.value == pytest.approx(30 * math.log(1 / 0.3), abs=1e-12)
        assert planted_interval_upper_ap3(50, 0.3, 0.0).value == 0.0


class TestClosedForms:
    def test_lz_kink(self):
        assert lz_closed_form(27 / 8) == pytest.approx(9 / 8, abs=1e-12)
        assert (27 / 8) ** (2 / 3) / 2 == pytest.approx((27 / 8) / 3, abs=1e-12)
        assert lz_closed_form(8.0) == pytest.approx(2.0)
        d = 1e-3
        assert lz_closed_form(d) == pytest.approx(d / 3)

    def test_lz_rejects(self):
        with pytest.raises(DomainError):
            lz_closed_form(0.0)

    def test_superposition(self, rng):
        assert superposition_check([0.3, 0.5], 0.0) == pytest.approx(0.0, abs=1e-15)
        assert superposition_check([0.3, 0.5], 1.0) == pytest.approx(0.0, abs=1e-15)
        for _ in range(100_000 // 100):
            r = int(rng.integers(1, 7))
            a = rng.uniform(size=(100, r))
            b = rng.uniform(size=100)
            for ai, bi in zip(a, b):
                assert superposition_check(ai, bi) >= -1e-12
