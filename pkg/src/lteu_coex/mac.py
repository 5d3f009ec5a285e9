"""Channel-contention fixed point for Wi-Fi / LTE-U coexistence.

The Wi-Fi stations run binary exponential backoff; the LTE-U link runs
listen-before-talk with a fixed contention window and occupies the channel
for a reservation-plus-burst block once its counter expires.  Per-slot
transmit probabilities follow the usual mean-field coupling: a station's
collision probability depends on everyone's transmit probability and vice
versa, solved here by bisection on the Wi-Fi collision probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache


@dataclass(frozen=True)
class MacParams:
    """MAC and frame constants for one coexistence scenario."""

    wifi_stations: int = 6          # contending Wi-Fi STAs
    wifi_min_cw: int = 32           # Wi-Fi minimum contention window
    wifi_backoff_stages: int = 5    # CW doublings before it saturates
    lteu_cw: int = 64               # fixed LTE-U contention window
    slot_us: float = 9.0            # backoff slot
    wifi_success_us: float = 540.72
    wifi_collision_us: float = 284.72
    difs_us: float = 34.0
    subframe_us: float = 1000.0     # LTE scheduling slot
    burst_subframes: int = 3        # subframes per DL or UL burst

    def __post_init__(self) -> None:
        if self.wifi_stations < 0:
            raise ValueError("wifi_stations must be >= 0")
        if self.wifi_min_cw < 2:
            raise ValueError("wifi_min_cw must be >= 2")
        if self.wifi_backoff_stages < 0:
            raise ValueError("wifi_backoff_stages must be >= 0")
        if self.lteu_cw < 1:
            raise ValueError("lteu_cw must be >= 1")
        for name in ("slot_us", "wifi_success_us", "wifi_collision_us",
                     "difs_us", "subframe_us"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.wifi_success_us < self.wifi_collision_us:
            raise ValueError("wifi_success_us must be >= wifi_collision_us")
        if self.burst_subframes < 1:
            raise ValueError("burst_subframes must be >= 1")

    def with_cw(self, z: int) -> "MacParams":
        return replace(self, lteu_cw=z)


@dataclass(frozen=True)
class FixedPointSolution:
    """Per-slot probabilities at the contention fixed point."""

    tau_wifi: float        # a Wi-Fi STA transmits in a random slot
    tau_lteu: float        # the LTE-U link starts its access in a random slot
    p_wifi: float          # a transmitting STA's packet collides
    p_lteu: float          # >= 1 STA transmits alongside an LTE-U access
    p_any_tx: float        # any node transmits
    p_wifi_success: float  # a busy slot is a clean single-STA transmission

    def as_dict(self) -> dict[str, float]:
        return {
            "tau_wifi": self.tau_wifi,
            "tau_lteu": self.tau_lteu,
            "p_wifi": self.p_wifi,
            "p_lteu": self.p_lteu,
            "p_any_tx": self.p_any_tx,
            "p_wifi_success": self.p_wifi_success,
        }


class FixedPointError(RuntimeError):
    """Raised when the contention fixed point fails to converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def _bianchi_tau(p: float, w: int, stages: int) -> float:
    """Wi-Fi transmit probability given its collision probability."""
    if abs(1.0 - 2.0 * p) < 1e-12:
        # removable singularity of the standard expression at p = 1/2
        return 2.0 / (w + 1 + 0.5 * w * stages)
    num = 2.0 * (1.0 - 2.0 * p)
    den = (1.0 - 2.0 * p) * (w + 1) + p * w * (1.0 - (2.0 * p) ** stages)
    return num / den


_MAX_BISECTIONS = 300
_RESIDUAL_TOL = 1e-10


@lru_cache(maxsize=4096)
def solve_fixed_point(params: MacParams) -> FixedPointSolution:
    """Solve the coupled transmit/collision probabilities.

    Reduces the system to one scalar equation in the Wi-Fi collision
    probability; the transmit probability is monotone in it, so the root
    is unique and bisection always brackets it.
    """
    n_w = params.wifi_stations
    tau_l = 2.0 / (params.lteu_cw + 1)
    if n_w == 0:
        return FixedPointSolution(
            tau_wifi=0.0, tau_lteu=tau_l, p_wifi=0.0, p_lteu=0.0,
            p_any_tx=tau_l, p_wifi_success=0.0,
        )

    def residual(p: float) -> float:
        tau = _bianchi_tau(p, params.wifi_min_cw, params.wifi_backoff_stages)
        return p - (1.0 - (1.0 - tau) ** (n_w - 1) * (1.0 - tau_l))

    lo, hi = 0.0, 1.0
    if residual(lo) > 0 or residual(hi) < 0:
        raise FixedPointError("fixed point not bracketed", residual(lo))
    p = 0.5
    for _ in range(_MAX_BISECTIONS):
        p = 0.5 * (lo + hi)
        if residual(p) < 0:
            lo = p
        else:
            hi = p
    if abs(residual(p)) > _RESIDUAL_TOL:
        raise FixedPointError("bisection did not converge", abs(residual(p)))

    tau_w = _bianchi_tau(p, params.wifi_min_cw, params.wifi_backoff_stages)
    p_lteu = 1.0 - (1.0 - tau_w) ** n_w
    p_any = 1.0 - (1.0 - tau_w) ** n_w * (1.0 - tau_l)
    p_ws = n_w * tau_w * (1.0 - tau_w) ** (n_w - 1) * (1.0 - tau_l) / p_any
    return FixedPointSolution(
        tau_wifi=tau_w, tau_lteu=tau_l, p_wifi=p,
        p_lteu=p_lteu, p_any_tx=p_any, p_wifi_success=p_ws,
    )


def fixed_point_residuals(params: MacParams, fp: FixedPointSolution) -> tuple[float, ...]:
    """Residuals of the four coupled equations at a candidate solution."""
    n_w = params.wifi_stations
    r_tau_w = fp.tau_wifi - _bianchi_tau(
        fp.p_wifi, params.wifi_min_cw, params.wifi_backoff_stages)
    r_tau_l = fp.tau_lteu - 2.0 / (params.lteu_cw + 1)
    r_p_w = fp.p_wifi - (1.0 - (1.0 - fp.tau_wifi) ** (n_w - 1) * (1.0 - fp.tau_lteu))
    r_p_l = fp.p_lteu - (1.0 - (1.0 - fp.tau_wifi) ** n_w)
    return (r_tau_w, r_tau_l, r_p_w, r_p_l)


def slot_event_probs(params: MacParams, fp: FixedPointSolution) -> tuple[float, float, float]:
    """(idle, wifi success, wifi collision) probabilities for one backoff
    slot of the LTE-U link, which only observes the Wi-Fi stations."""
    n_w = params.wifi_stations
    if n_w == 0:
        return 1.0, 0.0, 0.0
    tau = fp.tau_wifi
    p_idle = (1.0 - tau) ** n_w
    p_succ = n_w * tau * (1.0 - tau) ** (n_w - 1)
    return p_idle, p_succ, max(0.0, 1.0 - p_idle - p_succ)


def wifi_occupancy_ratio(params: MacParams, fp: FixedPointSolution) -> float:
    """Fraction of time Wi-Fi spends in successful transmissions.

    Renewal argument over one LTE-U access: Wi-Fi success time accrues
    only while the LTE-U counter is running, one channel observation per
    decrement; the cycle length is the pre-transmission period (contention
    plus reservation fill to the subframe boundary) plus the burst.
    """
    from .contention import contention_pmf, mean_pretx_us  # cycle-free at call time

    if params.wifi_stations == 0:
        return 0.0
    _, p_succ, _ = slot_event_probs(params, fp)
    mean_decrements = (params.lteu_cw - 1) / 2.0
    success_time = mean_decrements * p_succ * params.wifi_success_us
    pmf = contention_pmf(params, fp)
    cycle = mean_pretx_us(pmf, params.subframe_us) \
        + params.burst_subframes * params.subframe_us
    return success_time / cycle


class ThresholdUnreachable(ValueError):
    """Raised when no contention window satisfies the occupancy floor."""


_LINEAR_SCAN_LIMIT = 64


def min_cw(params: MacParams, d_th: float, z_max: int = 1024) -> int:
    """Smallest LTE-U contention window whose Wi-Fi occupancy meets d_th.

    Occupancy is nondecreasing in the window size, so a linear scan is
    exact; above the scan limit a bisection exploits the monotonicity.
    """
    if not 0.0 < d_th < 1.0:
        raise ValueError("d_th must be in (0, 1)")

    def ratio(z: int) -> float:
        p = params.with_cw(z)
        return wifi_occupancy_ratio(p, solve_fixed_point(p))

    for z in range(1, min(_LINEAR_SCAN_LIMIT, z_max) + 1):
        if ratio(z) >= d_th:
            return z
    if z_max <= _LINEAR_SCAN_LIMIT or ratio(z_max) < d_th:
        raise ThresholdUnreachable(
            f"occupancy {d_th} unreachable for any CW <= {z_max}")
    lo, hi = _LINEAR_SCAN_LIMIT + 1, z_max
    while lo < hi:
        mid = (lo + hi) // 2
        if ratio(mid) >= d_th:
            hi = mid
        else:
            lo = mid + 1
    return lo
