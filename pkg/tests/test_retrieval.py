"""Tests for retrieval module."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import binom

from ewsn_retrieval import retrieval
from ewsn_retrieval.errors import CapacityError, NumericError, ValidationError
from ewsn_retrieval.model import ModelParams, survival_form, w_survival
from ewsn_retrieval.retrieval import RetrievalQuery


def query(n=10, b=4, lam=0.2, mu=0.4, s=2):
    return RetrievalQuery(ModelParams(n, b, lam, mu), s)


class TestRetrievalQuery:
    def test_s_above_n(self):
        with pytest.raises(ValidationError, match="1 <= s <= N"):
            query(n=10, s=11)

    def test_s_zero(self):
        with pytest.raises(ValidationError):
            query(s=0)


class TestWsCdf:
    def test_maximum(self):
        q = query(n=3, s=3)
        F = 1 - w_survival(q.params, 4.0)
        assert retrieval.ws_cdf(q, 4.0) == pytest.approx(F**3, rel=1e-12)

    def test_minimum(self):
        q = query(n=3, s=1)
        S = w_survival(q.params, 4.0)
        assert retrieval.ws_cdf(q, 4.0) == pytest.approx(1 - S**3, rel=1e-12)

    def test_survival_complements_cdf(self):
        q = query()
        for t in (0.5, 5.0, 40.0):
            assert retrieval.ws_cdf(q, t) + retrieval.ws_survival(q, t) == pytest.approx(1.0)

    def test_zero_time(self):
        assert retrieval.ws_cdf(query(), 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_vectorized(self):
        q = query()
        ts = [0.0, 1.0, 7.5, 30.0]
        values = retrieval.ws_cdf_values(q, ts)
        assert list(values) == pytest.approx([retrieval.ws_cdf(q, t) for t in ts], abs=1e-14)

    def test_non_increasing_in_rank(self):
        n = 8
        for t in (0.5, 3.0, 12.0, 60.0):
            values = [retrieval.ws_cdf(query(n=n, s=s), t) for s in range(1, n + 1)]
            assert all(b <= a + 1e-15 for a, b in zip(values[:-1], values[1:]))


class TestClosedForm:
    def test_single_sensor(self):
        assert retrieval.expected_time_closed_form(query(n=1, b=1, s=1)) == pytest.approx(5.8333333333)

    def test_full_battery_minimum(self):
        q = query(n=7, b=3000, lam=5.0, s=1)
        assert retrieval.expected_time_closed_form(q) == pytest.approx(1 / 0.4, rel=1e-9)

    def test_matches_quadrature(self):
        q = query()
        assert retrieval.expected_time_closed_form(q) == pytest.approx(
            retrieval.expected_time_quadrature(q), rel=1e-8
        )

    def test_log_space_branch_agrees(self):
        q = query(n=12, b=3, lam=0.1, s=4)
        form = retrieval.survival_form(q.params)
        log_value, log_conditioning = retrieval._closed_form_log_space(q, form)
        value, conditioning = retrieval._closed_form_exact(q, form)
        assert log_value == pytest.approx(value, rel=1e-9)
        assert log_conditioning == pytest.approx(conditioning, rel=1e-6)

    def test_large_network_uses_log_space(self):
        q = query(n=80, b=4, lam=0.2, s=2)
        assert retrieval.expected_time_closed_form(q) == pytest.approx(
            retrieval.expected_time_quadrature(q), rel=1e-7
        )

    def test_equal_rates_delegate_to_quadrature(self):
        q = query(n=10, lam=0.04)
        assert math.isfinite(retrieval.expected_time_closed_form(q))
        assert retrieval.expected_time_closed_form(q) == retrieval.expected_time_quadrature(q)

    @pytest.mark.parametrize(
        "n,s",
        [(30, 30), (40, 20), (40, 40), (50, 25), (60, 60), (100, 50), (500, 5)],
    )
    def test_large_s_matches_quadrature(self, n, s):
        q = query(n=n, s=s)
        closed = retrieval.expected_time_closed_form(q)
        assert closed > 0
        assert closed == pytest.approx(retrieval.expected_time_quadrature(q), rel=1e-7)

    def test_cancellation_is_measured(self):
        q = query(n=50, s=25)
        _, conditioning = retrieval._closed_form_exact(q, retrieval.survival_form(q.params))
        assert conditioning > retrieval.CONDITIONING_LIMIT

    def test_small_s_stays_well_conditioned(self):
        q = query(n=50, s=2)
        _, conditioning = retrieval._closed_form_exact(q, retrieval.survival_form(q.params))
        assert conditioning < 1e4

    def test_outer_coefficients_partial_alternating_sum(self):
        # sum_{j<s} C(n,j) C(j,k) (-1)^(j-k) = C(n,k) (-1)^(s-1-k) C(n-k-1, s-1-k)
        n, s = 9, 5
        expected = [math.comb(n, k) * (-1) ** (s - 1 - k) * math.comb(n - k - 1, s - 1 - k) for k in range(s)]
        assert retrieval._outer_coefficients(n, s) == expected

    def test_dropped_alternation_breaks_agreement(self, monkeypatch):
        q = query(n=6, b=2, lam=0.2, s=3)
        reference = retrieval.expected_time_quadrature(q)
        monkeypatch.setattr(retrieval, "_alternating_sign", lambda j, k: 1)
        assert retrieval.expected_time_closed_form(q) != pytest.approx(reference, rel=1e-3)

    def test_negated_sum_raises(self, monkeypatch):
        monkeypatch.setattr(retrieval, "_alternating_sign", lambda j, k: 1 if (j - k) % 2 else -1)
        with pytest.raises(NumericError, match="non-positive"):
            retrieval.expected_time_closed_form(query(n=6, b=2, lam=0.2, s=3))


class TestQuadrature:
    def test_degenerate_single_phase(self):
        q = query(n=5, b=3000, lam=10.0, s=1)
        assert retrieval.expected_time_quadrature(q) == pytest.approx(1 / 0.4, rel=1e-8)

    def test_equal_rate_continuity(self):
        pivot = 0.04
        at = retrieval.expected_time_quadrature(query(lam=pivot))
        for lam in (pivot * (1 - 1e-6), pivot * (1 + 1e-6)):
            assert retrieval.expected_time_quadrature(query(lam=lam)) == pytest.approx(at, rel=1e-4)


class TestMatrixPath:
    @pytest.mark.parametrize("n,s,b,lam", [(2, 1, 1, 0.03), (4, 2, 3, 0.2), (6, 6, 1, 0.03), (6, 2, 3, 0.2)])
    def test_oracle_triangle(self, n, s, b, lam):
        q = query(n=n, b=b, lam=lam, s=s)
        closed = retrieval.expected_time_closed_form(q)
        assert retrieval.expected_time_quadrature(q) == pytest.approx(closed, rel=1e-7)
        assert retrieval.expected_time_matrix(q) == pytest.approx(closed, rel=1e-7)

    def test_cap(self):
        with pytest.raises(CapacityError):
            retrieval.expected_time(query(n=13), method="matrix")

    def test_dispatcher(self):
        q = query(n=4)
        assert retrieval.expected_time(q, "closed") == pytest.approx(retrieval.expected_time(q, "matrix"), rel=1e-7)
        with pytest.raises(ValidationError, match="unknown method"):
            retrieval.expected_time(q, "magic")

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_rank_increments_telescope(self, n):
        p = ModelParams(n, 2, 0.2, 0.4)
        means = [0.0] + [retrieval.expected_time_matrix(RetrievalQuery(p, s)) for s in range(1, n + 1)]
        form = survival_form(p)
        for s in range(1, n + 1):
            # E[W_s] - E[W_{s-1}] is the mean time with exactly s-1 of n sensors already reached
            gap, _ = integrate.quad(
                lambda t: binom.pmf(s - 1, n, np.clip(form.cdf(t), 0.0, 1.0)), 0.0, np.inf, limit=200
            )
            assert means[s] - means[s - 1] == pytest.approx(gap, rel=1e-6)
        assert math.fsum(b - a for a, b in zip(means[:-1], means[1:])) == pytest.approx(means[-1], rel=1e-12)
        assert means[-1] == pytest.approx(retrieval.expected_time_closed_form(RetrievalQuery(p, n)), rel=1e-7)


class TestIdentity:
    def test_k_zero(self):
        for n in (1, 2, 9):
            assert retrieval.identity_check(n, 0) == 1

    def test_hand_evaluation(self):
        assert retrieval.identity_check(5, 1) == Fraction(1)

    def test_exact(self):
        result = retrieval.identity_check(20, 7)
        assert isinstance(result, Fraction)
        assert result == 1

    def test_all_small(self):
        assert all(retrieval.identity_check(n, k) == 1 for n in range(1, 31) for k in range(n))

    def test_k_not_below_n(self):
        with pytest.raises(ValidationError):
            retrieval.identity_check(4, 4)


class TestAsymptotics:
    def test_harvest(self):
        assert retrieval.asymptotic_harvest(10, 1, 0.4) == pytest.approx(2.5)
        assert retrieval.asymptotic_harvest(10, 2, 0.4) == pytest.approx(5.2778, abs=1e-4)
        assert retrieval.asymptotic_harvest(2, 2, 1.0) == pytest.approx(3.0)

    def test_battery_branches(self):
        assert retrieval.asymptotic_battery(10, 1, 0.2, 0.4) == pytest.approx(1 / 0.4)
        assert retrieval.asymptotic_battery(10, 2, 0.03, 0.4) == pytest.approx(7.0370, abs=1e-4)

    def test_battery_branches_meet(self):
        assert retrieval.asymptotic_battery(10, 3, 0.04, 0.4) == pytest.approx(
            retrieval.asymptotic_battery(10, 3, 0.04 * (1 + 1e-12), 0.4)
        )

    def test_network(self):
        assert retrieval.asymptotic_network(2, 0.4) == pytest.approx(5.0)
        assert retrieval.asymptotic_network(1, 1.0) == pytest.approx(1.0)

    def test_invalid_rate(self):
        with pytest.raises(ValidationError):
            retrieval.asymptotic_network(2, 0.0)

    def test_harvest_limit_approached_monotonically(self):
        limit = retrieval.asymptotic_harvest(10, 2, 0.4)
        errors = [abs(retrieval.expected_time_closed_form(query(lam=lam)) - limit) for lam in (1.0, 10.0, 100.0)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[-1] / limit < 0.01

    @pytest.mark.parametrize("lam", [0.03, 0.2])
    def test_battery_limit(self, lam):
        values = [retrieval.expected_time_closed_form(query(b=b, lam=lam)) for b in (1, 4, 16, 64)]
        assert values == sorted(values, reverse=True)
        limit = retrieval.asymptotic_battery(10, 2, lam, 0.4)
        assert values[-1] == pytest.approx(limit, rel=0.01)

    def test_network_limit(self):
        values = [retrieval.expected_time_quadrature(query(n=n)) for n in (20, 50, 100, 200)]
        assert values == sorted(values, reverse=True)
        assert values[-1] == pytest.approx(5.0, rel=0.02)
