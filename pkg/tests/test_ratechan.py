import math

import numpy as np
import pytest
from scipy import integrate

from lteu_coex.ratechan import (
    FadingParams,
    correlation_coeff,
    db_to_linear,
    delayed_gain_survival,
    doppler_from_speed,
    feedback_prob,
    joint_gain_pdf,
    rate_thresholds,
    threshold_for_feedback_prob,
)

OMEGA = db_to_linear(7.78)  # ~5.998


class TestCorrelation:
    def test_zero_delay_is_one(self):
        assert correlation_coeff(0.0, 123.4) == 1.0
        assert correlation_coeff(0.0, 0.0) == 1.0

    def test_doppler_for_pedestrian_at_5_75ghz(self):
        # direct Doppler formula: (3 km/h) * 5.75 GHz / c
        assert doppler_from_speed(3.0, 5.75e9) == pytest.approx(
            (3 / 3.6) * 5.75e9 / 2.998e8, rel=1e-12)
        assert doppler_from_speed(3.0, 5.75e9) == pytest.approx(15.98, abs=0.01)

    def test_first_bessel_zero(self):
        # first root of J0 at argument 2.404826
        doppler = 15.98
        z = 2.404825557695773 / (2 * math.pi * doppler)
        assert correlation_coeff(z, doppler) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("delay", np.linspace(0.0, 0.5, 40).tolist())
    def test_bounded(self, delay):
        assert 0.0 <= correlation_coeff(delay, 15.98) <= 1.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            correlation_coeff(-1.0, 10.0)


class TestJointPdf:
    def test_independence_at_zero_rho(self):
        x, y = 2.3, 4.1
        expect = math.exp(-x / OMEGA) * math.exp(-y / OMEGA) / OMEGA ** 2
        assert joint_gain_pdf(x, y, OMEGA, 0.0) == pytest.approx(expect, rel=1e-12)

    def test_symmetry(self):
        for x, y in [(0.5, 7.0), (3.0, 3.5), (10.0, 0.1)]:
            assert joint_gain_pdf(x, y, OMEGA, 0.6) == pytest.approx(
                joint_gain_pdf(y, x, OMEGA, 0.6), rel=1e-12)

    def test_normalizes(self):
        val, _ = integrate.dblquad(
            lambda y, x: joint_gain_pdf(x, y, OMEGA, 0.5),
            0, np.inf, 0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.9, 0.99])
    def test_marginalizes_to_exponential(self, rho):
        for x in (0.7, 3.0, 9.0):
            marginal, _ = integrate.quad(
                lambda y: joint_gain_pdf(x, y, OMEGA, rho), 0, np.inf,
                limit=200)
            assert marginal == pytest.approx(
                math.exp(-x / OMEGA) / OMEGA, rel=1e-6)

    def test_rejects_bad_rho(self):
        with pytest.raises(ValueError):
            joint_gain_pdf(1.0, 1.0, OMEGA, 1.0)
        with pytest.raises(ValueError):
            joint_gain_pdf(1.0, 1.0, OMEGA, -0.1)

    @pytest.mark.parametrize("rho", [0.2, 0.8])
    def test_survival_matches_pdf_integral(self, rho):
        # Marcum-Q conditional survival against direct quadrature of the pdf
        x, level = 4.0, 2.5
        joint, _ = integrate.quad(
            lambda y: joint_gain_pdf(x, y, OMEGA, rho), level, np.inf,
            limit=200)
        cond = joint / (math.exp(-x / OMEGA) / OMEGA)
        assert delayed_gain_survival(x, level, OMEGA, rho) == pytest.approx(
            cond, rel=1e-8)


class TestRateTable:
    def test_first_cqi_threshold(self):
        table = rate_thresholds([0.1523], 0.398)
        assert table.thresholds[0] == pytest.approx(
            (2 ** 0.1523 - 1) / 0.398, rel=1e-12)
        assert table.thresholds[0] == pytest.approx(0.2797, abs=5e-4)

    def test_unit_coding_loss(self):
        table = rate_thresholds([1.0], 1.0)
        assert table.thresholds[0] == pytest.approx(1.0, rel=1e-12)

    def test_region_boundaries(self, rates):
        # below the first threshold no rate; top region is unbounded
        assert rates.rate_for_gain(0.0) == 0.0
        assert rates.rate_for_gain(1e9) == rates.max_rate
        assert rates.region_index(rates.thresholds[0]) == 0

    def test_thresholds_increasing(self, rates):
        thr = rates.thresholds
        assert all(b > a for a, b in zip(thr, thr[1:]))

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            rate_thresholds([1.0, 0.5], 0.398)


class TestFeedbackProb:
    def test_zero_threshold(self):
        assert feedback_prob(0.0, OMEGA) == 1.0

    def test_large_threshold(self):
        assert feedback_prob(1e9, OMEGA) == pytest.approx(0.0, abs=1e-300)

    def test_target_prob_inversion(self):
        lam = threshold_for_feedback_prob(0.2, OMEGA)
        assert lam == pytest.approx(-OMEGA * math.log(0.2), rel=1e-12)
        assert lam == pytest.approx(9.654, abs=2e-3)
        assert feedback_prob(lam, OMEGA) == pytest.approx(0.2, rel=1e-12)


class TestFadingParams:
    def test_per_user_means(self):
        f = FadingParams(mean_gain_db=7.78, doppler_hz=10.0, user_count=3,
                         niid_ratio=1.1)
        assert f.user_mean_gain(1) == pytest.approx(OMEGA)
        assert f.user_mean_gain(3) == pytest.approx(OMEGA * 1.21)
        assert not f.iid

    def test_iid_flag(self):
        f = FadingParams(mean_gain_db=7.78, doppler_hz=10.0, user_count=4)
        assert f.iid
        assert np.allclose(f.user_mean_gains(), OMEGA)
