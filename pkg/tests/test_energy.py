import itertools
import math

import numpy as np
import pytest

from lteu_coex.contention import build_delay_model
from lteu_coex.energy import (
    EEBreakdown,
    PowerProfile,
    basic_energy,
    dl_energy,
    energy_efficiency,
    expected_report_energy,
    feedback_energy,
    prob_any_report,
    ul_energy,
)
from lteu_coex.mac import MacParams
from lteu_coex.ratechan import FadingParams, db_to_linear
from lteu_coex.throughput import BestMFeedback, SchedulerKind, ThresholdFeedback

E0 = 2.28e-6
OMEGA = db_to_linear(7.78)


class TestFeedbackEnergy:
    def test_one_subchannel(self):
        # 4 + 2 + ceil(log2 100) = 13 units
        assert feedback_energy(1, 20, E0) == pytest.approx(13 * E0, rel=1e-12)

    def test_five_subchannels(self):
        # C(100,5) = 75287520, log2 ~ 26.17 -> 27; 4 + 10 + 27 = 41
        assert feedback_energy(5, 20, E0) == pytest.approx(41 * E0, rel=1e-12)
        assert feedback_energy(5, 20, E0) == pytest.approx(9.348e-5, rel=1e-6)

    def test_empty_report(self):
        assert feedback_energy(0, 20, E0) == pytest.approx(4 * E0, rel=1e-12)

    def test_matches_big_integer_arithmetic(self):
        for delta in range(0, 40):
            exact = 4 + 2 * delta + (math.ceil(math.log2(math.comb(100, delta)))
                                     if delta else 0)
            assert feedback_energy(delta, 40, E0) == pytest.approx(
                exact * E0, rel=1e-12)

    def test_bounds(self):
        with pytest.raises(ValueError):
            feedback_energy(21, 20, E0)
        with pytest.raises(ValueError):
            feedback_energy(-1, 20, E0)


class TestReportEnergy:
    def test_best_m_is_constant(self):
        val = expected_report_energy(BestMFeedback(5), OMEGA, 20, E0)
        assert val == pytest.approx(feedback_energy(5, 20, E0), rel=1e-12)

    def test_threshold_brute_force(self):
        # exhaustive expectation of the report cost over 2^S subsets
        s, prob = 6, 0.3
        lam = -OMEGA * math.log(prob)
        expect = 0.0
        for pattern in itertools.product((0, 1), repeat=s):
            delta = sum(pattern)
            if delta == 0:
                continue  # silent users spend nothing
            w = prob ** delta * (1 - prob) ** (s - delta)
            expect += w * feedback_energy(delta, s, E0)
        val = expected_report_energy(ThresholdFeedback(lam), OMEGA, s, E0)
        assert val == pytest.approx(expect, abs=1e-12)

    def test_threshold_binomial_sum(self):
        # 21-term direct summation for the evaluation-scale setting
        s, prob = 20, 0.2
        lam = -OMEGA * math.log(prob)
        expect = sum(math.comb(s, d) * prob ** d * (1 - prob) ** (s - d)
                     * feedback_energy(d, s, E0) for d in range(1, s + 1))
        val = expected_report_energy(ThresholdFeedback(lam), OMEGA, s, E0)
        assert val == pytest.approx(expect, rel=1e-12)

    def test_vanishes_for_huge_threshold(self):
        val = expected_report_energy(ThresholdFeedback(1e9), OMEGA, 20, E0)
        assert val == pytest.approx(0.0, abs=1e-250)

    def test_monotone_in_threshold(self):
        lams = [0.1, 1.0, 5.0, 20.0, 100.0]
        vals = [expected_report_energy(ThresholdFeedback(l), OMEGA, 20, E0)
                for l in lams]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


class TestIndicators:
    def test_threshold_iid(self, fading_iid):
        lam = -OMEGA * math.log(0.2)
        val = prob_any_report(ThresholdFeedback(lam), fading_iid, 20)
        assert val == pytest.approx(1 - 0.8 ** 10, rel=1e-9)

    def test_best_m_full(self, fading_iid):
        assert prob_any_report(BestMFeedback(20), fading_iid, 20) == pytest.approx(1.0)

    def test_best_m_partial(self, fading_iid):
        val = prob_any_report(BestMFeedback(5), fading_iid, 20)
        assert val == pytest.approx(1 - 0.75 ** 10, rel=1e-12)

    def test_threshold_brute_force_users(self):
        # exhaustive over per-user report indicators, heterogeneous means
        fading = FadingParams(mean_gain_db=7.78, doppler_hz=10.0,
                              user_count=4, niid_ratio=1.2)
        lam = 6.0
        probs = np.exp(-lam / fading.user_mean_gains())
        expect = 0.0
        for pattern in itertools.product((0, 1), repeat=4):
            w = math.prod(p if b else 1 - p for b, p in zip(pattern, probs))
            expect += w * (1.0 if any(pattern) else 0.0)
        val = prob_any_report(ThresholdFeedback(lam), fading, 20)
        assert val == pytest.approx(expect, abs=1e-12)

    def test_monotone_in_threshold(self, fading_iid):
        vals = [prob_any_report(ThresholdFeedback(l), fading_iid, 20)
                for l in (0.1, 1.0, 5.0, 25.0, 100.0)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


class TestEnergyComponents:
    def test_basic_arithmetic(self):
        profile = PowerProfile()
        # 10 users, 0.1 mW, 8 ms round trip
        assert basic_energy(profile, 10, 8000.0) == pytest.approx(8e-6, rel=1e-12)
        assert basic_energy(PowerProfile(basic_w=0.0), 10, 8000.0) == 0.0
        assert basic_energy(profile, 10, 16000.0) == pytest.approx(
            2 * basic_energy(profile, 10, 8000.0), rel=1e-12)

    def test_ul_energy_best_m(self, fading_iid):
        profile = PowerProfile()
        val = ul_energy(profile, 10, BestMFeedback(5), fading_iid, 20,
                        mean_contention_us=0.0, mean_reservation_us=0.0)
        assert val == pytest.approx(10 * 41 * E0, rel=1e-9)

    def test_ul_energy_reservation_flag(self, fading_iid):
        profile = PowerProfile()
        kw = dict(mean_contention_us=300.0, mean_reservation_us=700.0)
        full = ul_energy(profile, 10, BestMFeedback(5), fading_iid, 20, **kw)
        slim = ul_energy(profile, 10, BestMFeedback(5), fading_iid, 20,
                         include_reservation=False, **kw)
        assert full - slim == pytest.approx(
            10 * profile.reserve_w * 700e-6, rel=1e-9)

    def test_ul_energy_huge_threshold_reduces_to_sensing(self, fading_iid):
        profile = PowerProfile()
        val = ul_energy(profile, 10, ThresholdFeedback(1e9), fading_iid, 20,
                        mean_contention_us=300.0, mean_reservation_us=700.0)
        sensing_only = 10 * (profile.sense_w * 300e-6
                             + profile.reserve_w * 700e-6)
        assert val == pytest.approx(sensing_only, rel=1e-9)

    def test_dl_energy_assembly(self, fading_iid):
        profile = PowerProfile()
        lam = -OMEGA * math.log(0.2)
        val = dl_energy(profile, 10, ThresholdFeedback(lam), fading_iid,
                        s=20, n_sb=3, t_sb_us=1000.0, mean_dl_pretx_us=2000.0)
        expect = (10 * profile.sense_w * 2000e-6
                  + profile.receive_w * 1e-3 * 3 * (1 - 0.8 ** 10)
                  + 10 * profile.estimate_w * 1e-3)
        assert val == pytest.approx(expect, rel=1e-12)


class TestEnergyEfficiency:
    def test_zero_rate_gives_zero_kappa(self, fading_iid, rates):
        params = MacParams(wifi_stations=0, lteu_cw=64)
        delay = build_delay_model(params)
        ee = energy_efficiency(
            SchedulerKind.RANDOM, ThresholdFeedback(1e9), fading_iid, rates,
            PowerProfile(), 20e6, 20, delay, source="analytic")
        assert ee.kappa == pytest.approx(0.0, abs=1e-6)
        assert ee.total_j > 0

    def test_power_scaling(self, fading_iid, rates):
        params = MacParams(wifi_stations=2, lteu_cw=64)
        delay = build_delay_model(params)
        scheme = ThresholdFeedback(-OMEGA * math.log(0.2))
        base = energy_efficiency(SchedulerKind.RANDOM, scheme, fading_iid,
                                 rates, PowerProfile(), 20e6, 20, delay,
                                 source="analytic")
        doubled_profile = PowerProfile(
            sense_w=2 * 11e-3, reserve_w=2 * 100e-3, estimate_w=2 * 200e-3,
            receive_w=2 * 200e-3, basic_w=2 * 0.1e-3, report_bit_j=2 * E0)
        doubled = energy_efficiency(SchedulerKind.RANDOM, scheme, fading_iid,
                                    rates, doubled_profile, 20e6, 20, delay,
                                    source="analytic")
        assert doubled.kappa == pytest.approx(base.kappa / 2, rel=1e-9)

    def test_components_sum(self, fading_iid, rates, mac_reference):
        delay = build_delay_model(mac_reference)
        ee = energy_efficiency(
            SchedulerKind.RANDOM, BestMFeedback(5), fading_iid, rates,
            PowerProfile(), 20e6, 20, delay, source="analytic")
        assert ee.total_j == pytest.approx(
            ee.basic_j + ee.uplink_j + ee.downlink_j, rel=1e-15)
        assert ee.kappa == pytest.approx(ee.bits_delivered / ee.total_j,
                                         rel=1e-15)

    def test_breakdown_type(self):
        ee = EEBreakdown(basic_j=1.0, uplink_j=2.0, downlink_j=3.0,
                         bits_delivered=12.0)
        assert ee.total_j == 6.0
        assert ee.kappa == 2.0

    def test_reference_operating_point(self, fading_iid, rates):
        # tuned scenario (6 Wi-Fi STAs, Z=46, pedestrian speed): peak
        # efficiency about 13.29 Mbit/J +-15%, under the same simplification
        # the reference optimization chain uses (reservation-signal energy
        # neglected); see the decisions ledger for the delay-law caveat
        delay = build_delay_model(MacParams(wifi_stations=6, lteu_cw=46))
        best = 0.0
        for lam_db in np.arange(6.0, 15.1, 0.5):
            from lteu_coex.ratechan import db_to_linear
            ee = energy_efficiency(
                SchedulerKind.GREEDY, ThresholdFeedback(db_to_linear(lam_db)),
                fading_iid, rates, PowerProfile(), 20e6, 20, delay,
                source="mc", samples=150_000, seed=11,
                include_reservation=False)
            best = max(best, ee.kappa / 1e6)
        assert best == pytest.approx(13.29, rel=0.15)
