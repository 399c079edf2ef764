"""Tests for phtype module."""

import math

import numpy as np
import pytest
from scipy import integrate

from ewsn_retrieval import phtype
from ewsn_retrieval.errors import CapacityError, DimensionError, NumericError, ValidationError
from ewsn_retrieval.model import ModelParams, steady_state, w_mean, w_phase_type
from ewsn_retrieval.retrieval import RetrievalQuery, expected_time_closed_form, ws_cdf


@pytest.fixture
def single_sensor():
    """Two-phase law of W at lambda_e=0.2, mu=0.4, N=1, B=1."""
    return w_phase_type(ModelParams(1, 1, 0.2, 0.4))


class TestPhaseType:
    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            phtype.PhaseType(alpha=[1.0, 0.0], T=np.ones((2, 3)))

    def test_rejects_alpha_length_mismatch(self):
        with pytest.raises(DimensionError):
            phtype.PhaseType(alpha=[1.0], T=-np.eye(2))

    def test_rejects_positive_row_sum(self):
        with pytest.raises(ValidationError):
            phtype.PhaseType(alpha=[1.0, 0.0], T=[[-1.0, 2.0], [0.0, -1.0]])

    def test_rejects_conservative_generator(self):
        with pytest.raises(ValidationError, match="no exit rate"):
            phtype.PhaseType(alpha=[1.0, 0.0], T=[[-1.0, 1.0], [1.0, -1.0]])

    def test_exponential(self):
        d = phtype.PhaseType.exponential(0.5)
        assert d.phases == 1
        assert d.exit_rates.tolist() == [0.5]


class TestKronProduct:
    def test_identity(self):
        np.testing.assert_array_equal(phtype.kron_product(np.eye(2), np.eye(2)), np.eye(4))

    def test_scalar(self):
        np.testing.assert_array_equal(phtype.kron_product([[2.0]], [[3.0]]), [[6.0]])

    def test_block_anti_diagonal(self):
        block = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = phtype.kron_product([[0.0, 1.0], [1.0, 0.0]], block)
        np.testing.assert_array_equal(out[:2, 2:], block)
        np.testing.assert_array_equal(out[2:, :2], block)
        np.testing.assert_array_equal(out[:2, :2], np.zeros((2, 2)))


class TestKronSum:
    def test_scalars_add(self):
        np.testing.assert_array_equal(phtype.kron_sum([[1.5]], [[2.0]]), [[3.5]])

    def test_zero_is_identity(self):
        m = np.array([[-1.0, 0.5], [0.0, -2.0]])
        np.testing.assert_array_equal(phtype.kron_sum(m, [[0.0]]), m)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            phtype.kron_sum(np.ones((2, 3)), np.eye(2))


class TestKronPowerSum:
    def test_n_one(self):
        m = np.array([[-1.0, 1.0], [0.0, -3.0]])
        np.testing.assert_array_equal(phtype.kron_power_sum(m, 1), m)

    def test_scalar_fold(self):
        np.testing.assert_array_equal(phtype.kron_power_sum([[-1.0]], 3), [[-3.0]])

    def test_ten_fold(self):
        T = np.array([[-0.2, 0.2], [0.0, -0.04]])
        out = phtype.kron_power_sum(T, 10)
        assert out.shape == (1024, 1024)
        assert out[0, 0] == pytest.approx(10 * T[0, 0])

    def test_cap(self):
        with pytest.raises(CapacityError, match="4096"):
            phtype.kron_power_sum(-np.eye(2), 13)

    def test_power_product(self):
        v = np.array([0.25, 0.75])
        out = phtype.kron_power_product(v, 3)
        assert out.shape == (8,)
        assert out.sum() == pytest.approx(1.0)
        assert out[0] == pytest.approx(0.25**3)


class TestMatrixExp:
    def test_zero_matrix(self):
        np.testing.assert_array_equal(phtype.matrix_exp(np.zeros((3, 3)), 4.0), np.eye(3))

    def test_diagonal(self):
        out = phtype.matrix_exp(np.diag([-1.0, -2.0]), 1.0)
        np.testing.assert_allclose(out, np.diag([math.exp(-1), math.exp(-2)]), atol=1e-12)

    def test_upper_triangular_closed_form(self):
        lam, r, t = 0.2, 0.4, 1.0
        out = phtype.matrix_exp(np.array([[-lam, lam], [0.0, -r]]), t)
        off = lam * (math.exp(-lam * t) - math.exp(-r * t)) / (r - lam)
        np.testing.assert_allclose(
            out, [[math.exp(-lam * t), off], [0.0, math.exp(-r * t)]], atol=1e-12
        )

    def test_matches_scipy_for_general_matrix(self):
        from scipy import linalg

        m = np.array([[0.1, 0.3], [-0.2, 0.05]])
        np.testing.assert_allclose(phtype.matrix_exp(m, 2.0), linalg.expm(2.0 * m))

    def test_non_finite(self):
        with pytest.raises(NumericError):
            phtype.matrix_exp(np.array([[np.nan]]), 1.0)

    @pytest.mark.parametrize("p", [1, 2, 3, 4])
    def test_semigroup(self, p):
        rng = np.random.default_rng(100 + p)
        for _ in range(5):
            m = rng.uniform(0.0, 1.0, size=(p, p))
            np.fill_diagonal(m, 0.0)
            np.fill_diagonal(m, -(m.sum(axis=1) + rng.uniform(0.1, 1.0, size=p)))
            t1, t2 = rng.uniform(0.0, 3.0, size=2)
            np.testing.assert_allclose(
                phtype.matrix_exp(m, t1 + t2),
                phtype.matrix_exp(m, t1) @ phtype.matrix_exp(m, t2),
                atol=1e-10,
            )

    def test_expm_action_matches_full_exponential(self):
        T = np.array([[-0.5, 0.3, 0.1], [0.0, -1.0, 0.5], [0.2, 0.0, -0.4]])
        v = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(phtype.expm_action(v, T, 3.0), v @ phtype.matrix_exp(T, 3.0), atol=1e-12)


class TestPhtCdf:
    def test_zero_time(self, single_sensor):
        assert phtype.pht_cdf(single_sensor, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_single_sensor_example(self, single_sensor):
        survival = -(1 / 3) * math.exp(-2.0) + (4 / 3) * math.exp(-1.0)
        assert phtype.pht_cdf(single_sensor, 5.0) == pytest.approx(1.0 - survival, abs=1e-10)
        assert phtype.pht_cdf(single_sensor, 5.0) == pytest.approx(0.55457, abs=5e-5)

    def test_monotone_and_tends_to_one(self, single_sensor):
        grid = np.linspace(0.0, 250.0, 60)
        values = [phtype.pht_cdf(single_sensor, t) for t in grid]
        assert all(b >= a - 1e-12 for a, b in zip(values[:-1], values[1:]))
        assert values[-1] == pytest.approx(1.0, abs=1e-9)

    def test_negative_time(self, single_sensor):
        with pytest.raises(ValidationError):
            phtype.pht_cdf(single_sensor, -1.0)


class TestMoments:
    def test_exponential_moments(self):
        d = phtype.PhaseType.exponential(0.5)
        assert phtype.pht_mean(d) == pytest.approx(2.0)
        assert phtype.pht_moment(d, 2) == pytest.approx(8.0)

    def test_mean_absorption_time(self, single_sensor):
        assert phtype.pht_mean(single_sensor) == pytest.approx(w_mean(ModelParams(1, 1, 0.2, 0.4)))
        assert phtype.pht_mean(single_sensor) == pytest.approx(2.5 + (2 / 3) / 0.2)

    def test_invalid_order(self, single_sensor):
        with pytest.raises(ValidationError):
            phtype.pht_moment(single_sensor, 0)


class TestOrderStatCdf:
    def test_single_copy(self, single_sensor):
        for t in (0.5, 3.0, 12.0):
            assert phtype.order_stat_cdf_matrix(single_sensor, 1, 1, t) == pytest.approx(
                phtype.pht_cdf(single_sensor, t), abs=1e-12
            )

    def test_minimum_of_exponentials(self):
        d = phtype.PhaseType.exponential(0.7)
        t = 1.3
        assert phtype.order_stat_cdf_matrix(d, 2, 1, t) == pytest.approx(1 - math.exp(-2 * 0.7 * t))

    def test_matches_binomial_form(self):
        q = RetrievalQuery(ModelParams(4, 1, 0.2, 0.4), 2)
        d = w_phase_type(q.params)
        assert phtype.order_stat_cdf_matrix(d, 4, 2, 2.0) == pytest.approx(ws_cdf(q, 2.0), abs=1e-9)

    def test_rank_out_of_range(self, single_sensor):
        with pytest.raises(ValidationError):
            phtype.order_stat_cdf_matrix(single_sensor, 3, 4, 1.0)

    def test_cap(self, single_sensor):
        with pytest.raises(CapacityError):
            phtype.order_stat_cdf_matrix(single_sensor, 6, 2, 1.0, cap=32)

    def test_non_increasing_in_rank(self):
        n = 4
        d = w_phase_type(ModelParams(n, 2, 0.2, 0.4))
        for t in (0.5, 2.0, 8.0, 30.0):
            values = [phtype.order_stat_cdf_matrix(d, n, s, t) for s in range(1, n + 1)]
            assert all(b <= a + 1e-12 for a, b in zip(values[:-1], values[1:]))


class TestOrderStatMoment:
    def test_minimum_of_two_exponentials(self):
        d = phtype.PhaseType.exponential(0.4)
        assert phtype.order_stat_moment(d, 2, 1) == pytest.approx(1 / (2 * 0.4))

    def test_maximum_of_two_exponentials(self):
        d = phtype.PhaseType.exponential(0.4)
        assert phtype.order_stat_moment(d, 2, 2) == pytest.approx(1.5 / 0.4)

    def test_single_copy_is_mean(self):
        p = ModelParams(1, 1, 0.2, 0.4)
        nu0 = steady_state(p).empty
        assert phtype.order_stat_moment(w_phase_type(p), 1, 1) == pytest.approx(nu0 / 0.2 + 1 / 0.4)

    def test_matches_closed_form(self):
        p = ModelParams(6, 2, 0.2, 0.4)
        q = RetrievalQuery(p, 3)
        assert phtype.order_stat_moment(w_phase_type(p), 6, 3) == pytest.approx(
            expected_time_closed_form(q), rel=1e-8
        )

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_mean_is_integral_of_survival(self, single_sensor, n):
        for s in range(1, n + 1):
            area, _ = integrate.quad(
                lambda t: 1.0 - phtype.order_stat_cdf_matrix(single_sensor, n, s, t), 0.0, np.inf, limit=200
            )
            assert phtype.order_stat_moment(single_sensor, n, s) == pytest.approx(area, rel=1e-6)

    def test_second_moment_of_minimum(self):
        d = phtype.PhaseType.exponential(0.4)
        # min of 3 is exponential with rate 1.2
        assert phtype.order_stat_moment(d, 3, 1, k=2) == pytest.approx(2 / 1.2**2)
