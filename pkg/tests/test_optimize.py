import numpy as np
import pytest

from lteu_coex.mac import MacParams, solve_fixed_point, wifi_occupancy_ratio
from lteu_coex.optimize import (
    OptimizerConfig,
    best_m_search,
    exhaustive_lambda,
    solve_z,
    threshold_search,
)


def concave_toy(lam):
    return -(lam - 5.0) ** 2 + 7.0


class TestThresholdSearch:
    def test_concave_toy(self):
        cfg = OptimizerConfig(restarts=1)
        res = threshold_search(concave_toy, cfg)
        assert res.lambda_star_db == pytest.approx(5.0, abs=0.05)
        assert res.kappa_star == pytest.approx(7.0, abs=1e-3)

    def test_concave_toy_multi_restart(self):
        cfg = OptimizerConfig(restarts=4)
        res = threshold_search(concave_toy, cfg)
        assert res.lambda_star_db == pytest.approx(5.0, abs=0.05)

    def test_stays_in_box(self):
        cfg = OptimizerConfig(restarts=3)
        res = threshold_search(lambda x: x, cfg)  # pushes to the upper edge
        assert 0.0 <= res.lambda_star_db <= cfg.lambda_max_db
        assert res.lambda_star_db == pytest.approx(cfg.lambda_max_db, abs=0.05)
        assert all(0.0 <= lam <= cfg.lambda_max_db for lam, _ in res.trace)

    def test_decreasing_objective_finds_origin(self):
        cfg = OptimizerConfig(restarts=3)
        res = threshold_search(lambda x: -x, cfg)
        assert res.lambda_star_db == pytest.approx(0.0, abs=0.05)

    def test_gradient_small_at_interior_optimum(self):
        cfg = OptimizerConfig(restarts=2)
        res = threshold_search(concave_toy, cfg)
        lam = res.lambda_star_db
        h = cfg.fd_step_db
        grad = (concave_toy(lam + h) - concave_toy(lam - h)) / (2 * h)
        # tolerance plus the central-difference truncation allowance
        assert abs(grad) <= cfg.tolerance + 2 * h

    def test_restart_dominance(self):
        # the single-restart initializer is the first multi-restart one,
        # so more restarts can only match or improve a deterministic search
        def bumpy(lam):
            return np.sin(1.3 * lam) + 0.05 * lam

        one = threshold_search(bumpy, OptimizerConfig(restarts=1))
        three = threshold_search(bumpy, OptimizerConfig(restarts=3))
        assert three.kappa_star >= one.kappa_star - 1e-12

    def test_multimodal_needs_restarts(self):
        # two maxima; the global one sits near the low edge
        def two_peaks(lam):
            return (np.exp(-0.5 * ((lam - 2.0) / 0.8) ** 2) * 2.0
                    + np.exp(-0.5 * ((lam - 14.0) / 2.0) ** 2))

        res = threshold_search(two_peaks, OptimizerConfig(restarts=6))
        assert res.lambda_star_db == pytest.approx(2.0, abs=0.2)

    def test_trace_collects_iterates(self):
        res = threshold_search(concave_toy, OptimizerConfig(restarts=2))
        assert len(res.trace) >= 2
        assert all(len(t) == 2 for t in res.trace)


class TestExhaustive:
    def test_grid_argmax(self):
        cfg = OptimizerConfig(grid_step_db=0.2)
        res = exhaustive_lambda(concave_toy, cfg)
        assert res.lambda_star_db == pytest.approx(5.0, abs=0.100001)
        assert len(res.trace) == 101

    def test_single_point_grid(self):
        cfg = OptimizerConfig(lambda_max_db=0.1, grid_step_db=0.2)
        res = exhaustive_lambda(concave_toy, cfg)
        assert res.lambda_star_db == 0.0

    def test_tie_breaks_low(self):
        cfg = OptimizerConfig(grid_step_db=1.0)
        res = exhaustive_lambda(lambda x: 1.0, cfg)
        assert res.lambda_star_db == 0.0


class TestBestM:
    def test_monotone_picks_all(self):
        res = best_m_search(lambda m: float(m), 20)
        assert res.m_star == 20

    def test_single_channel(self):
        res = best_m_search(lambda m: 1.0, 1)
        assert res.m_star == 1

    def test_interior_peak(self):
        res = best_m_search(lambda m: -(m - 7) ** 2, 20)
        assert res.m_star == 7

    def test_tie_breaks_low(self):
        res = best_m_search(lambda m: 1.0, 5)
        assert res.m_star == 1

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            best_m_search(lambda m: 1.0, 0)


class TestSolveZ:
    def test_delegates_to_min_cw(self):
        base = MacParams(wifi_stations=6)
        z = solve_z(base, 6 / 16)
        p = base.with_cw(z)
        assert wifi_occupancy_ratio(p, solve_fixed_point(p)) >= 6 / 16
        if z > 1:
            q = base.with_cw(z - 1)
            assert wifi_occupancy_ratio(q, solve_fixed_point(q)) < 6 / 16
