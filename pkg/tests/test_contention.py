import numpy as np
import pytest

from lteu_coex.contention import (
    build_delay_model,
    collision_prob_first,
    contention_pmf,
    feedback_delay_pmf,
    mean_contention,
    mean_pretx_us,
    mean_reservation,
    mean_tx_duration,
    pretx_pmf,
    total_variation,
)
from lteu_coex.mac import MacParams, solve_fixed_point


def make(nw, z, **kw):
    p = MacParams(wifi_stations=nw, lteu_cw=z, **kw)
    return p, solve_fixed_point(p)


class TestContentionPmf:
    def test_no_wifi_uniform(self):
        # without freezes: uniform over {difs + b*slot}, mean 34 + 31.5*9
        p, fp = make(0, 64)
        pmf = contention_pmf(p, fp)
        times, probs = pmf.support()
        assert len(times) == 64
        assert times[0] == 34.0
        assert times[-1] == 34.0 + 63 * 9.0
        assert np.allclose(probs, 1 / 64)
        assert pmf.mean_us() == pytest.approx(317.5, rel=1e-12)

    def test_single_slot_window_point_mass(self):
        p, fp = make(6, 1)
        pmf = contention_pmf(p, fp)
        times, probs = pmf.support()
        assert list(times) == [34.0]
        assert probs[0] == pytest.approx(1.0, abs=1e-12)

    def test_mass_accounting(self, mac_reference):
        pmf = contention_pmf(mac_reference)
        assert pmf.total_mass() == pytest.approx(1.0, abs=1e-12)
        assert pmf.truncation_tail <= 1e-6
        assert np.all(pmf.probs >= 0)

    def test_minimum_support_at_difs(self, mac_reference):
        times, _ = contention_pmf(mac_reference).support()
        assert times[0] >= mac_reference.difs_us

    def test_lattice_vs_monte_carlo(self, mac_reference):
        # fine 1 us lattice: the TV noise floor is ~4e3/sqrt(episodes),
        # so give the sampler enough episodes to resolve 0.01
        lattice = contention_pmf(mac_reference, mode="lattice")
        mc = contention_pmf(mac_reference, mode="monte_carlo",
                            samples=4_000_000, seed=7)
        assert total_variation(lattice, mc) <= 0.01

    def test_monte_carlo_needs_samples(self, mac_reference):
        with pytest.raises(ValueError):
            contention_pmf(mac_reference, mode="monte_carlo", samples=9_999)

    def test_grid_must_divide_slot(self, mac_reference):
        with pytest.raises(ValueError):
            contention_pmf(mac_reference, grid_us=2.0)

    def test_fft_path_matches_direct(self):
        # the spectral path kicks in above the direct-convolution cutoff
        from lteu_coex.contention import (_decrement_kernel,
                                          _uniform_mixture_direct,
                                          _uniform_mixture_fft)
        p, fp = make(6, 100)
        kernel = _decrement_kernel(p, fp, 1.0)
        direct = _uniform_mixture_direct(kernel, 100)
        spectral = _uniform_mixture_fft(kernel, 100)
        assert 0.5 * np.abs(direct - spectral).sum() < 1e-10


class TestPretx:
    def test_short_contention_one_subframe(self):
        p, fp = make(0, 64)
        pre = pretx_pmf(contention_pmf(p, fp), 1000.0)
        # max duration 601 us < one subframe
        assert pre.start == 1
        assert len(pre.probs) == 1
        assert pre.probs[0] == pytest.approx(1.0, abs=1e-12)

    def test_support_minimum_one(self, mac_reference):
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        assert pre.start == 1

    def test_mass_preserved(self, mac_reference):
        pmf = contention_pmf(mac_reference)
        pre = pretx_pmf(pmf, 1000.0)
        assert pre.total_mass() == pytest.approx(float(pmf.probs.sum()),
                                                 abs=1e-14)


class TestDelayPmf:
    def test_point_mass_case(self):
        p, fp = make(0, 64)
        pre = pretx_pmf(contention_pmf(p, fp), 1000.0)
        delay = feedback_delay_pmf(pre, n_sb=3, alpha=1)
        assert delay.start == 5          # both pre-tx periods are one subframe
        assert len(delay.probs) == 1
        assert delay.probs[0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [1, 2, 3])
    def test_minimum_support(self, mac_reference, alpha):
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        delay = feedback_delay_pmf(pre, n_sb=3, alpha=alpha)
        assert delay.start == 3 + alpha + 1

    def test_convolution_mass(self, mac_reference):
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        delay = feedback_delay_pmf(pre, n_sb=3, alpha=2)
        assert delay.total_mass() == pytest.approx(1.0, abs=2e-6)

    def test_mean_linearity(self, mac_reference):
        # mean delay = 2 * mean pre-tx + (n_sb + alpha - 1)
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        for alpha in (1, 3):
            delay = feedback_delay_pmf(pre, n_sb=3, alpha=alpha)
            assert delay.mean() == pytest.approx(
                2 * pre.mean() + 3 + alpha - 1, rel=1e-9)

    def test_alpha_bounds(self, mac_reference):
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        with pytest.raises(ValueError):
            feedback_delay_pmf(pre, n_sb=3, alpha=0)
        with pytest.raises(ValueError):
            feedback_delay_pmf(pre, n_sb=3, alpha=4)


class TestCollisionProb:
    def test_zero_without_wifi(self):
        p, fp = make(0, 64)
        pmf = contention_pmf(p, fp)
        assert collision_prob_first(pmf, 1000.0, 284.72, fp.p_lteu) == 0.0

    def test_long_collision_covers_everything(self, mac_reference):
        fp = solve_fixed_point(mac_reference)
        pmf = contention_pmf(mac_reference)
        assert collision_prob_first(pmf, 1000.0, 1000.0, fp.p_lteu) == fp.p_lteu
        assert collision_prob_first(pmf, 1000.0, 1500.0, fp.p_lteu) == fp.p_lteu

    def test_scales_with_window(self, mac_reference):
        fp = solve_fixed_point(mac_reference)
        pmf = contention_pmf(mac_reference)
        narrow = collision_prob_first(pmf, 1000.0, 100.0, fp.p_lteu)
        wide = collision_prob_first(pmf, 1000.0, 500.0, fp.p_lteu)
        assert 0.0 < narrow < wide < fp.p_lteu


class TestMeans:
    def test_no_wifi_values(self):
        p, fp = make(0, 64)
        pmf = contention_pmf(p, fp)
        assert mean_contention(pmf) == pytest.approx(317.5, rel=1e-12)
        assert mean_reservation(pmf, 1000.0) == pytest.approx(682.5, rel=1e-12)
        pre = pretx_pmf(pmf, 1000.0)
        assert mean_tx_duration(pre, 3, 1000.0) == pytest.approx(4000.0)

    def test_single_slot_window(self):
        p, fp = make(6, 1)
        assert mean_contention(contention_pmf(p, fp)) == pytest.approx(34.0)

    def test_mean_tx_lower_bound(self, mac_reference):
        pre = pretx_pmf(contention_pmf(mac_reference), 1000.0)
        assert mean_tx_duration(pre, 3, 1000.0) >= 4 * 1000.0

    def test_mean_tx_grows_with_cw(self):
        values = []
        for z in (32, 64, 128):
            p, fp = make(6, z)
            pre = pretx_pmf(contention_pmf(p, fp), 1000.0)
            values.append(mean_tx_duration(pre, 3, 1000.0))
        assert values[0] < values[1] < values[2]

    def test_reservation_consistency(self, mac_reference):
        pmf = contention_pmf(mac_reference)
        assert mean_reservation(pmf, 1000.0) == pytest.approx(
            mean_pretx_us(pmf, 1000.0) - mean_contention(pmf), rel=1e-12)


class TestDelayModel:
    def test_assembly(self, mac_reference):
        model = build_delay_model(mac_reference)
        assert set(model.delay_by_subframe) == {1, 2, 3}
        assert model.mean_tx_dl_us == model.mean_tx_ul_us
        assert model.collision_prob(1) == model.collision_first
        assert model.collision_prob(2) == 0.0
        assert model.mean_cycle_us == pytest.approx(2 * model.mean_tx_dl_us)

    def test_collision_only_first_subframe(self, mac_reference):
        model = build_delay_model(mac_reference)
        assert 0.0 < model.collision_first < 1.0
        assert model.collision_prob(3) == 0.0
