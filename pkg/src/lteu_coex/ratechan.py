"""Correlated Rayleigh fading model and discrete rate adaptation.

Channel power gains are exponential (Rayleigh envelope squared) with mean
Omega.  A gain observed now and the gain of the same subchannel after a
delay z form a bivariate exponential pair whose correlation is the squared
zero-order Bessel function of the Doppler-scaled lag.  Rate adaptation maps
gain regions [L_n, L_n+1) to a fixed ladder of spectral efficiencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

SPEED_OF_LIGHT = 2.998e8  # m/s

# Densities degenerate toward a ridge as the pair correlation approaches 1;
# analytic operations refuse beyond this point (simulation handles rho = 1).
MAX_ANALYTIC_RHO = 0.999


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x_lin: float) -> float:
    return 10.0 * math.log10(x_lin)


def doppler_from_speed(speed_kmh: float, carrier_hz: float) -> float:
    """Maximum Doppler spread in Hz for a node moving at the given speed."""
    return (speed_kmh / 3.6) * carrier_hz / SPEED_OF_LIGHT


@dataclass(frozen=True)
class FadingParams:
    """Per-user mean gains and time-correlation parameters.

    User k (1-based) has mean subchannel gain Omega * niid_ratio**(k-1);
    niid_ratio = 1 recovers the i.i.d. user scenario.
    """

    mean_gain_db: float          # mean subchannel gain, dB
    doppler_hz: float            # maximum Doppler spread, Hz
    user_count: int = 1
    niid_ratio: float = 1.0      # geometric spread of per-user means

    def __post_init__(self) -> None:
        if self.doppler_hz < 0:
            raise ValueError("doppler_hz must be >= 0")
        if self.niid_ratio <= 0:
            raise ValueError("niid_ratio must be > 0")
        if self.user_count < 1:
            raise ValueError("user_count must be >= 1")

    @property
    def mean_gain_linear(self) -> float:
        return db_to_linear(self.mean_gain_db)

    def user_mean_gain(self, k: int) -> float:
        """Mean gain of user k, 1-based."""
        if not 1 <= k <= self.user_count:
            raise ValueError(f"user index {k} outside 1..{self.user_count}")
        return self.mean_gain_linear * self.niid_ratio ** (k - 1)

    def user_mean_gains(self) -> np.ndarray:
        return self.mean_gain_linear * self.niid_ratio ** np.arange(self.user_count)

    @property
    def iid(self) -> bool:
        return self.niid_ratio == 1.0


@dataclass(frozen=True)
class RateTable:
    """Spectral-efficiency ladder and its gain thresholds.

    thresholds[n] is the minimum gain supporting rates[n]; gains below
    thresholds[0] carry no data.  The open upper region is unbounded.
    """

    rates: tuple[float, ...]         # bits/s/Hz, strictly increasing
    coding_loss: float               # practical-code SNR penalty, linear
    thresholds: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.coding_loss <= 0:
            raise ValueError("coding_loss must be > 0")
        if not self.rates or any(r <= 0 for r in self.rates):
            raise ValueError("rates must be positive")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly increasing")
        thr = tuple((2.0 ** r - 1.0) / self.coding_loss for r in self.rates)
        object.__setattr__(self, "thresholds", thr)

    @property
    def max_rate(self) -> float:
        return self.rates[-1]

    def region_index(self, gain: np.ndarray | float) -> np.ndarray:
        """Index n with thresholds[n] <= gain < thresholds[n+1]; -1 below all."""
        return np.searchsorted(np.asarray(self.thresholds), gain, side="right") - 1

    def rate_for_gain(self, gain: float) -> float:
        n = int(self.region_index(gain))
        return self.rates[n] if n >= 0 else 0.0


def rate_thresholds(rates, coding_loss: float) -> RateTable:
    """Build a RateTable by inverting r = log2(1 + coding_loss * L)."""
    return RateTable(rates=tuple(float(r) for r in rates), coding_loss=coding_loss)


def correlation_coeff(delay_s: float, doppler_hz: float) -> float:
    """Gain correlation after a delay: J0(2*pi*doppler*delay) squared."""
    if delay_s < 0 or doppler_hz < 0:
        raise ValueError("delay and doppler must be >= 0")
    return float(special.j0(2.0 * math.pi * doppler_hz * delay_s) ** 2)


def joint_gain_pdf(x, y, mean: float, rho: float):
    """Joint density of (current gain, delayed gain) at correlation rho.

    Evaluated with the exponentially scaled Bessel I0 so large arguments
    (rho near 1, large gains) do not overflow.
    """
    if mean <= 0:
        raise ValueError("mean must be > 0")
    if not 0.0 <= rho < MAX_ANALYTIC_RHO:
        raise ValueError(f"rho must be in [0, {MAX_ANALYTIC_RHO})")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("gains must be >= 0")
    c = mean * (1.0 - rho)
    u = 2.0 * np.sqrt(rho * x * y) / c
    # i0e(u) = I0(u) * exp(-u); fold the u back into the exponent
    log_pdf = -(x + y) / c + u + np.log(special.i0e(u)) - np.log(mean * c)
    out = np.exp(log_pdf)
    return out if out.ndim else float(out)


def delayed_gain_survival(x, threshold: float, mean: float, rho: float):
    """P{delayed gain >= threshold | current gain = x}.

    The delayed gain given the current one is a scaled noncentral
    chi-square with two degrees of freedom, so the survival probability
    is a first-order Marcum Q function.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    if not 0.0 <= rho < MAX_ANALYTIC_RHO:
        raise ValueError(f"rho must be in [0, {MAX_ANALYTIC_RHO})")
    x = np.asarray(x, dtype=float)
    if rho == 0.0:
        out = np.full_like(x, math.exp(-threshold / mean))
    else:
        c = mean * (1.0 - rho)
        out = stats.ncx2.sf(2.0 * threshold / c, 2, 2.0 * rho * x / c)
    return out if out.ndim else float(out)


def feedback_prob(threshold: float, mean: float) -> float:
    """Probability one subchannel's gain clears the feedback threshold."""
    if threshold < 0 or mean <= 0:
        raise ValueError("threshold must be >= 0 and mean > 0")
    return math.exp(-threshold / mean)


def threshold_for_feedback_prob(prob: float, mean: float) -> float:
    """Inverse of feedback_prob: the linear threshold giving report prob `prob`."""
    if not 0.0 < prob <= 1.0:
        raise ValueError("prob must be in (0, 1]")
    return -mean * math.log(prob)
