"""Coexistence-aware energy-efficiency maximization.

The joint problem (feedback parameter, contention window) decomposes: the
window is fixed at the smallest value that still leaves Wi-Fi its required
occupancy share, then the feedback threshold is optimized by multi-start
gradient ascent with a golden-section line search (or, for best-m feedback,
the integer parameter is scanned exhaustively).

Objectives are plain callables; gradient tolerances assume values of order
unity, so energy efficiencies are fed to the searches in Mbit/J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import energy as energy_mod
from .contention import build_delay_model
from .mac import MacParams, min_cw, solve_fixed_point, wifi_occupancy_ratio
from .ratechan import FadingParams, RateTable, db_to_linear
from .throughput import BestMFeedback, SchedulerKind, ThresholdFeedback

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizerConfig:
    tolerance: float = 1e-3          # stop when |dk/dlambda| falls below
    lambda_max_db: float = 20.0
    restarts: int = 1
    grid_step_db: float = 0.2        # exhaustive-search resolution
    fd_step_db: float = 0.1          # central-difference step
    z_max: int = 1024
    max_iterations: int = 200        # per restart
    line_tol_factor: float = 1e-4    # golden-section tolerance, x lambda_max
    memo_quantum_db: float = 0.01    # objective cache resolution
    init_offset: float = 0.5         # phase of the low-discrepancy restarts

    def __post_init__(self) -> None:
        if self.tolerance <= 0 or self.lambda_max_db <= 0:
            raise ValueError("tolerance and lambda_max_db must be > 0")
        if self.restarts < 1 or self.grid_step_db <= 0 or self.fd_step_db <= 0:
            raise ValueError("bad search parameters")


@dataclass(frozen=True)
class OptResult:
    kappa_star: float
    lambda_star_db: float | None = None
    m_star: int | None = None
    z_star: int | None = None
    occupancy: float | None = None
    trace: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def parameter(self) -> float:
        return self.lambda_star_db if self.m_star is None else self.m_star


class _Memo:
    """Objective cache on a quantized argument, for line-search reuse."""

    def __init__(self, fn, quantum: float):
        self.fn = fn
        self.quantum = quantum
        self.cache: dict[int, float] = {}
        self.calls = 0

    def __call__(self, x: float) -> float:
        key = round(x / self.quantum)
        if key not in self.cache:
            self.calls += 1
            self.cache[key] = float(self.fn(key * self.quantum))
        return self.cache[key]


def solve_z(params: MacParams, d_th: float, z_max: int = 1024) -> int:
    """Smallest contention window that keeps Wi-Fi above its occupancy floor."""
    return min_cw(params, d_th, z_max=z_max)


def _golden_section_max(fn, lo: float, hi: float, tol: float) -> float:
    """Argmax of fn over [lo, hi] by golden-section search."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fn(x1)
    return 0.5 * (a + b)


def threshold_search(objective, cfg: OptimizerConfig) -> OptResult:
    """Multi-start gradient ascent over the feedback threshold (dB).

    Each restart climbs the numerical gradient with a golden-section line
    search along it, stopping when the gradient magnitude drops below the
    tolerance, an iterate is pinned at the boundary, or the iteration cap
    is hit.  Restart initializers follow a deterministic low-discrepancy
    sequence over [0, lambda_max].
    """
    f = _Memo(objective, cfg.memo_quantum_db)
    lam_max = cfg.lambda_max_db
    h = cfg.fd_step_db
    line_tol = cfg.line_tol_factor * lam_max
    trace: list[tuple[float, float]] = []
    best_lam, best_val = None, -math.inf

    for j in range(cfg.restarts):
        lam = lam_max * ((cfg.init_offset + j * _GOLDEN) % 1.0)
        trace.append((lam, f(lam)))
        for _ in range(cfg.max_iterations):
            up = min(lam + h, lam_max)
            dn = max(lam - h, 0.0)
            grad = (f(up) - f(dn)) / (up - dn)
            if abs(grad) <= cfg.tolerance:
                break
            hi = (lam_max - lam) / grad if grad > 0 else -lam / grad
            if hi <= 0:
                break  # gradient points out of the box from its edge
            step = _golden_section_max(lambda u: f(lam + u * grad), 0.0,
                                       hi, line_tol / abs(grad))
            new_lam = min(max(lam + step * grad, 0.0), lam_max)
            if f(new_lam) <= f(lam) or abs(new_lam - lam) < 1e-12:
                break
            lam = new_lam
            trace.append((lam, f(lam)))
        val = f(lam)
        if val > best_val or (val == best_val and lam < best_lam):
            best_lam, best_val = lam, val

    return OptResult(kappa_star=best_val, lambda_star_db=best_lam,
                     trace=tuple(trace))


def exhaustive_lambda(objective, cfg: OptimizerConfig) -> OptResult:
    """Grid scan of the threshold axis; exact argmax on the grid."""
    f = _Memo(objective, cfg.memo_quantum_db)
    grid = np.arange(0.0, cfg.lambda_max_db + 0.5 * cfg.grid_step_db,
                     cfg.grid_step_db)
    values = [f(float(lam)) for lam in grid]
    idx = int(np.argmax(values))  # first max = smallest lambda on ties
    return OptResult(kappa_star=values[idx], lambda_star_db=float(grid[idx]),
                     trace=tuple((float(l), v) for l, v in zip(grid, values)))


def best_m_search(objective, s: int) -> OptResult:
    """Exhaustive scan of the report-count parameter m in 1..s."""
    if s < 1:
        raise ValueError("s must be >= 1")
    values = [float(objective(m)) for m in range(1, s + 1)]
    idx = int(np.argmax(values))
    return OptResult(kappa_star=values[idx], m_star=idx + 1,
                     trace=tuple((float(m), v)
                                 for m, v in zip(range(1, s + 1), values)))


def _kappa_objective(scheduler: SchedulerKind, fading: FadingParams,
                     rates: RateTable, profile, bandwidth_hz: float,
                     subchannels: int, delay, source: str, samples: int,
                     seed: int, include_reservation: bool):
    def of_scheme(scheme) -> float:
        ee = energy_mod.energy_efficiency(
            scheduler, scheme, fading, rates, profile, bandwidth_hz,
            subchannels, delay, source=source, samples=samples, seed=seed,
            include_reservation=include_reservation)
        return ee.kappa / 1e6  # Mbit/J keeps gradients of order unity
    return of_scheme


def optimize_th(params: MacParams, fading: FadingParams, rates: RateTable,
                profile, bandwidth_hz: float, subchannels: int, d_th: float,
                cfg: OptimizerConfig, scheduler: SchedulerKind = SchedulerKind.GREEDY,
                source: str = "mc", samples: int = 200_000, seed: int = 0,
                include_reservation: bool = True,
                exhaustive: bool = False) -> OptResult:
    """Joint (threshold, window) optimization by decomposition.

    The window is fixed first at the occupancy-feasible minimum; the
    threshold search then runs with that window baked into the delay model.
    """
    z_star = solve_z(params, d_th, z_max=cfg.z_max)
    tuned = params.with_cw(z_star)
    fp = solve_fixed_point(tuned)
    delay = build_delay_model(tuned, fp)
    of_scheme = _kappa_objective(scheduler, fading, rates, profile,
                                 bandwidth_hz, subchannels, delay, source,
                                 samples, seed, include_reservation)

    def objective(lam_db: float) -> float:
        return of_scheme(ThresholdFeedback(db_to_linear(lam_db)))

    search = exhaustive_lambda if exhaustive else threshold_search
    res = search(objective, cfg)
    return OptResult(kappa_star=res.kappa_star,
                     lambda_star_db=res.lambda_star_db, z_star=z_star,
                     occupancy=wifi_occupancy_ratio(tuned, fp),
                     trace=res.trace)


def optimize_bm(params: MacParams, fading: FadingParams, rates: RateTable,
                profile, bandwidth_hz: float, subchannels: int, d_th: float,
                cfg: OptimizerConfig, scheduler: SchedulerKind = SchedulerKind.GREEDY,
                source: str = "mc", samples: int = 200_000, seed: int = 0,
                include_reservation: bool = True) -> OptResult:
    """Joint (report count, window) optimization by decomposition."""
    z_star = solve_z(params, d_th, z_max=cfg.z_max)
    tuned = params.with_cw(z_star)
    fp = solve_fixed_point(tuned)
    delay = build_delay_model(tuned, fp)
    of_scheme = _kappa_objective(scheduler, fading, rates, profile,
                                 bandwidth_hz, subchannels, delay, source,
                                 samples, seed, include_reservation)
    res = best_m_search(lambda m: of_scheme(BestMFeedback(m)), subchannels)
    return OptResult(kappa_star=res.kappa_star, m_star=res.m_star,
                     z_star=z_star,
                     occupancy=wifi_occupancy_ratio(tuned, fp),
                     trace=res.trace)
