"""User-side energy accounting and the bits-per-joule efficiency ratio.

One accounting period covers an uplink transaction (sensing through the
contention, reservation signalling, CSI reports) and the following downlink
transaction (sensing through the pre-transmission period, data reception,
channel estimation), plus baseline circuit drain over the whole pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contention import DelayModel
from .ratechan import FadingParams, RateTable
from .throughput import (
    BestMFeedback,
    FeedbackScheme,
    SchedulerKind,
    ThresholdFeedback,
    burst_rate_sum,
    rate_by_delay,
)

FEEDBACK_COMB_BASE = 100  # codebook size constant of the report-cost model


@dataclass(frozen=True)
class PowerProfile:
    """Per-user power draws (W) and the per-bit report cost (J)."""

    sense_w: float = 11e-3        # channel sensing
    reserve_w: float = 100e-3     # sending the reservation signal
    estimate_w: float = 200e-3    # channel estimation
    receive_w: float = 200e-3     # data reception across the whole band
    basic_w: float = 0.1e-3       # baseline circuitry
    report_bit_j: float = 2.28e-6

    def __post_init__(self) -> None:
        for name in ("sense_w", "reserve_w", "estimate_w", "receive_w",
                     "basic_w", "report_bit_j"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class EEBreakdown:
    basic_j: float
    uplink_j: float
    downlink_j: float
    bits_delivered: float   # per transaction pair

    @property
    def total_j(self) -> float:
        return self.basic_j + self.uplink_j + self.downlink_j

    @property
    def kappa(self) -> float:
        """Delivered bits per joule."""
        return self.bits_delivered / self.total_j


def feedback_energy(delta: int, total: int, e0: float,
                    comb_base: int = FEEDBACK_COMB_BASE) -> float:
    """Energy to report `delta` of `total` subchannels.

    Report size: a four-bit header, two bits of quality per subchannel, and
    an index field sized for choosing delta items out of the codebook base.
    The log-binomial is taken through lgamma so large bases never overflow.
    """
    if not 0 <= delta <= total:
        raise ValueError("need 0 <= delta <= total")
    if delta == 0:
        return 4.0 * e0
    log2_comb = (math.lgamma(comb_base + 1) - math.lgamma(delta + 1)
                 - math.lgamma(comb_base - delta + 1)) / math.log(2.0)
    # guard against lgamma round-off pushing an exact power just above its ceil
    bits = math.ceil(round(log2_comb, 9))
    return (4.0 + 2.0 * delta + bits) * e0


def expected_report_energy(scheme: FeedbackScheme, user_mean: float, s: int,
                           e0: float, comb_base: int = FEEDBACK_COMB_BASE) -> float:
    """Mean CSI-report energy of one user for one uplink transaction."""
    if isinstance(scheme, BestMFeedback):
        return feedback_energy(scheme.m, s, e0, comb_base)
    p = math.exp(-scheme.threshold / user_mean)
    total = 0.0
    for delta in range(1, s + 1):
        w = math.comb(s, delta) * p ** delta * (1.0 - p) ** (s - delta)
        total += w * feedback_energy(delta, s, e0, comb_base)
    return total


def prob_any_report(scheme: FeedbackScheme, fading: FadingParams, s: int) -> float:
    """Probability at least one user reports a given subchannel."""
    if isinstance(scheme, BestMFeedback):
        return 1.0 - (1.0 - scheme.m / s) ** fading.user_count
    means = fading.user_mean_gains()
    none = np.prod(1.0 - np.exp(-scheme.threshold / means))
    return float(1.0 - none)


def ul_energy(profile: PowerProfile, k: int, scheme: FeedbackScheme,
              fading: FadingParams, s: int, mean_contention_us: float,
              mean_reservation_us: float,
              include_reservation: bool = True) -> float:
    """Mean user energy over one uplink transaction (J)."""
    sense = profile.sense_w * mean_contention_us * 1e-6
    reserve = profile.reserve_w * mean_reservation_us * 1e-6 if include_reservation else 0.0
    reports = sum(
        expected_report_energy(scheme, fading.user_mean_gain(u), s,
                               profile.report_bit_j)
        for u in range(1, k + 1))
    return k * (sense + reserve) + reports


def dl_energy(profile: PowerProfile, k: int, scheme: FeedbackScheme,
              fading: FadingParams, s: int, n_sb: int, t_sb_us: float,
              mean_dl_pretx_us: float) -> float:
    """Mean user energy over one downlink transaction (J).

    All users sense through the pre-transmission period; scheduled
    subchannels keep one receiver on per subframe; everyone estimates the
    channel in the last subframe.
    """
    t_sb = t_sb_us * 1e-6
    sense = k * profile.sense_w * mean_dl_pretx_us * 1e-6
    receive = profile.receive_w * t_sb * n_sb * prob_any_report(scheme, fading, s)
    estimate = k * profile.estimate_w * t_sb
    return sense + receive + estimate


def basic_energy(profile: PowerProfile, k: int, mean_tx_total_us: float) -> float:
    """Baseline circuit energy of all users over one transaction pair (J)."""
    return k * profile.basic_w * mean_tx_total_us * 1e-6


def energy_efficiency(scheduler: SchedulerKind, scheme: FeedbackScheme,
                      fading: FadingParams, rates: RateTable,
                      profile: PowerProfile, bandwidth_hz: float,
                      subchannels: int, delay: DelayModel,
                      source: str = "analytic", samples: int = 200_000,
                      seed: int = 0, include_reservation: bool = True,
                      rate_of_age: dict[int, float] | None = None) -> EEBreakdown:
    """Users' energy efficiency for one scenario.

    The numerator reuses the collision-discounted burst rate sum of the
    throughput chain; the denominator adds the three energy components.
    A precomputed age->rate map may be passed to share conditional-rate
    evaluations across scenarios that differ only in energy terms.
    """
    k = fading.user_count
    if rate_of_age is None:
        rate_of_age = rate_by_delay(scheduler, scheme, fading, rates,
                                    subchannels, delay, source=source,
                                    samples=samples, seed=seed)
    bits = delay.t_sb_us * 1e-6 * bandwidth_hz * burst_rate_sum(delay, rate_of_age)
    e_ul = ul_energy(profile, k, scheme, fading, subchannels,
                     delay.mean_contention_us, delay.mean_reservation_us,
                     include_reservation=include_reservation)
    e_dl = dl_energy(profile, k, scheme, fading, subchannels, delay.n_sb,
                     delay.t_sb_us, delay.pretx.mean() * delay.t_sb_us)
    e_basic = basic_energy(profile, k, delay.mean_cycle_us)
    return EEBreakdown(basic_j=e_basic, uplink_j=e_ul, downlink_j=e_dl,
                       bits_delivered=bits)
