"""Conditional per-subchannel rates under delayed CSI and their assembly
into the downlink network throughput.

For the random scheduler the conditional mean rate has closed double-integral
forms (threshold and best-m feedback, i.i.d. and non-i.i.d. users).  The inner
integral over the delayed gain is a Marcum Q function, leaving one adaptive
quadrature per rate region.  The remaining scheduler/feedback combinations are
estimated by Monte Carlo over correlated gain pairs; the same estimator doubles
as the independent oracle for the closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .contention import DelayModel
from .ratechan import (
    MAX_ANALYTIC_RHO,
    FadingParams,
    RateTable,
    correlation_coeff,
    delayed_gain_survival,
)

MAX_ENUMERABLE_USERS = 20
_WEIGHT_FLOOR = 1e-12  # binomial weights below this are skipped
_QUAD_OPTS = dict(epsabs=1e-10, epsrel=1e-8, limit=200)


class SchedulerKind(enum.Enum):
    ROUND_ROBIN = "round_robin"
    GREEDY = "greedy"
    PROPORTIONAL_FAIR = "proportional_fair"
    RANDOM = "random"


@dataclass(frozen=True)
class ThresholdFeedback:
    """Report a subchannel only when its gain clears the threshold."""

    threshold: float  # linear gain

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class BestMFeedback:
    """Report the m strongest of a user's subchannels."""

    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")


FeedbackScheme = ThresholdFeedback | BestMFeedback


@dataclass(frozen=True)
class CondRateResult:
    rate: float                      # bits/s/Hz
    error_estimate: float            # quadrature bound or MC standard error


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < MAX_ANALYTIC_RHO:
        raise ValueError(f"analytic rate needs rho in [0, {MAX_ANALYTIC_RHO})")


def _region_bounds(rates: RateTable) -> list[tuple[float, float, float]]:
    """(rate, lower threshold, upper threshold) per adaptation region."""
    thr = list(rates.thresholds) + [math.inf]
    return [(rates.rates[n], thr[n], thr[n + 1]) for n in range(len(rates.rates))]


def _region_integral(lo: float, hi: float, level: float, mean: float, rho: float,
                     extra=None) -> tuple[float, float]:
    """Integral over [lo, hi) of the gain density times the probability the
    delayed gain still clears `level`, optionally weighted by extra(x)."""
    if hi <= lo:
        return 0.0, 0.0

    def integrand(x: float) -> float:
        val = math.exp(-x / mean) / mean * float(
            delayed_gain_survival(x, level, mean, rho))
        return val * extra(x) if extra is not None else val

    value, err = integrate.quad(integrand, lo, hi, **_QUAD_OPTS)
    return value, err


def _single_user_rate_th(threshold: float, rates: RateTable, mean: float,
                         rho: float) -> tuple[float, float]:
    """Sum over rate regions of the truncated-gain double integral, without
    the report-conditioning factor."""
    total = err = 0.0
    for r, lo, hi in _region_bounds(rates):
        v, e = _region_integral(max(lo, threshold), hi, lo, mean, rho)
        total += r * v
        err += r * e
    return total, err


def cond_rate_random_th_iid(fading: FadingParams, rates: RateTable,
                            scheme: ThresholdFeedback, k: int,
                            rho: float) -> CondRateResult:
    """Random scheduler, threshold feedback, i.i.d. users."""
    _check_rho(rho)
    mean = fading.mean_gain_linear
    lam = scheme.threshold
    base, err = _single_user_rate_th(lam, rates, mean, rho)
    p_fb = math.exp(-lam / mean)
    weight_sum = 0.0
    for delta in range(1, k + 1):
        w = math.comb(k, delta) * (1.0 - p_fb) ** (k - delta) * p_fb ** (delta - 1)
        if w < _WEIGHT_FLOOR:
            continue
        weight_sum += w
    return CondRateResult(rate=weight_sum * base, error_estimate=weight_sum * err)


def _order_stat_weight(x: np.ndarray | float, m: int, s: int, mean: float):
    """P{a gain of value x ranks within a user's m strongest of s channels}."""
    p_better = np.exp(-np.asarray(x, dtype=float) / mean)
    out = np.zeros_like(p_better)
    for n in range(m):
        out = out + math.comb(s - 1, n) * p_better ** n * (1.0 - p_better) ** (s - 1 - n)
    return out


def _single_user_rate_bm(m: int, s: int, rates: RateTable, mean: float,
                         rho: float) -> tuple[float, float]:
    total = err = 0.0
    for r, lo, hi in _region_bounds(rates):
        v, e = _region_integral(lo, hi, lo, mean, rho,
                                extra=lambda x: float(_order_stat_weight(x, m, s, mean)))
        total += r * v
        err += r * e
    return total, err


def cond_rate_random_bm_iid(fading: FadingParams, rates: RateTable,
                            scheme: BestMFeedback, k: int, s: int,
                            rho: float) -> CondRateResult:
    """Random scheduler, best-m feedback, i.i.d. users."""
    _check_rho(rho)
    if not 1 <= scheme.m <= s:
        raise ValueError("need 1 <= m <= subchannel count")
    mean = fading.mean_gain_linear
    base, err = _single_user_rate_bm(scheme.m, s, rates, mean, rho)
    p = scheme.m / s
    weight_sum = 0.0
    for delta in range(1, k + 1):
        w = math.comb(k, delta) * p ** (delta - 1) * (1.0 - p) ** (k - delta)
        if w < _WEIGHT_FLOOR:
            continue
        weight_sum += w
    return CondRateResult(rate=weight_sum * base, error_estimate=weight_sum * err)


def _poisson_binomial(probs: np.ndarray) -> np.ndarray:
    """Pmf of a sum of independent Bernoulli variables."""
    pmf = np.array([1.0])
    for p in probs:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def _check_user_count(k: int) -> None:
    if k > MAX_ENUMERABLE_USERS:
        raise ValueError(
            f"feedback-set enumeration is limited to {MAX_ENUMERABLE_USERS} users")


def cond_rate_random_th_niid(fading: FadingParams, rates: RateTable,
                             scheme: ThresholdFeedback,
                             rho: float) -> CondRateResult:
    """Random scheduler, threshold feedback, per-user mean gains.

    Summing over all feedback sets reduces to one coefficient per user: the
    expected reciprocal set size given that the user reported, computed from
    the Poisson-binomial law of the other users' report indicators.
    """
    _check_rho(rho)
    _check_user_count(fading.user_count)
    lam = scheme.threshold
    means = fading.user_mean_gains()
    q = np.exp(-lam / means)                    # per-user report probabilities
    total = err = 0.0
    for k_idx in range(fading.user_count):
        # expected reciprocal set size given user k reported; its own report
        # probability cancels against the conditioning of the rate integral
        pb = _poisson_binomial(np.delete(q, k_idx))
        coeff = float(np.sum(pb / (np.arange(len(pb)) + 1.0)))
        base, e = _single_user_rate_th(lam, rates, float(means[k_idx]), rho)
        total += coeff * base
        err += coeff * e
    return CondRateResult(rate=total, error_estimate=err)


def cond_rate_random_bm_niid(fading: FadingParams, rates: RateTable,
                             scheme: BestMFeedback, s: int,
                             rho: float) -> CondRateResult:
    """Random scheduler, best-m feedback, per-user mean gains."""
    _check_rho(rho)
    _check_user_count(fading.user_count)
    if not 1 <= scheme.m <= s:
        raise ValueError("need 1 <= m <= subchannel count")
    k = fading.user_count
    p = scheme.m / s
    coeff = sum(math.comb(k - 1, d) * p ** d * (1.0 - p) ** (k - 1 - d) / (d + 1)
                for d in range(k))
    total = err = 0.0
    for mean in fading.user_mean_gains():
        base, e = _single_user_rate_bm(scheme.m, s, rates, float(mean), rho)
        total += coeff * base
        err += coeff * e
    return CondRateResult(rate=total, error_estimate=err)


def cond_rate_analytic(scheme: FeedbackScheme, fading: FadingParams,
                       rates: RateTable, s: int, rho: float) -> CondRateResult:
    """Closed-form conditional rate for the random scheduler."""
    if fading.iid:
        if isinstance(scheme, ThresholdFeedback):
            return cond_rate_random_th_iid(fading, rates, scheme,
                                           fading.user_count, rho)
        return cond_rate_random_bm_iid(fading, rates, scheme,
                                       fading.user_count, s, rho)
    if isinstance(scheme, ThresholdFeedback):
        return cond_rate_random_th_niid(fading, rates, scheme, rho)
    return cond_rate_random_bm_niid(fading, rates, scheme, s, rho)


# ---------------------------------------------------------------------------
# Monte Carlo estimator (all schedulers) over correlated gain pairs
# ---------------------------------------------------------------------------

_MC_MIN_SAMPLES = 10_000
_MC_CHUNK = 65_536


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _mix_delayed(h: np.ndarray, w: np.ndarray, rho: float) -> np.ndarray:
    if rho >= 1.0:
        return h
    return math.sqrt(rho) * h + math.sqrt(1.0 - rho) * w


def _schedule(scheduler: SchedulerKind, gains: np.ndarray, reported: np.ndarray,
              means: np.ndarray, rr_users: np.ndarray,
              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Pick one user per sample; returns (user index, served mask)."""
    any_rep = reported.any(axis=1)
    if scheduler is SchedulerKind.GREEDY:
        keyed = np.where(reported, gains, -np.inf)
        pick = np.argmax(keyed, axis=1)
        return pick, any_rep
    if scheduler is SchedulerKind.PROPORTIONAL_FAIR:
        keyed = np.where(reported, gains / means, -np.inf)
        pick = np.argmax(keyed, axis=1)
        return pick, any_rep
    if scheduler is SchedulerKind.RANDOM:
        keyed = np.where(reported, rng.random(reported.shape), -1.0)
        pick = np.argmax(keyed, axis=1)
        return pick, any_rep
    # round robin: the user whose turn it is, served only if they reported
    served = reported[np.arange(len(rr_users)), rr_users]
    return rr_users, served


def mc_rate_vs_delay(scheduler: SchedulerKind, scheme: FeedbackScheme,
                     fading: FadingParams, rates: RateTable, s: int,
                     rhos: np.ndarray, samples: int,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Estimate the conditional mean rate for every correlation in `rhos`.

    One set of gain draws is shared across all correlations (common random
    numbers), so differences along the delay axis are not noise-dominated.
    Returns (means, standard errors), each of len(rhos).
    """
    if samples < _MC_MIN_SAMPLES:
        raise ValueError(f"need at least {_MC_MIN_SAMPLES} samples")
    rhos = np.asarray(rhos, dtype=float)
    if np.any((rhos < 0) | (rhos > 1)):
        raise ValueError("rho must be in [0, 1]")
    k = fading.user_count
    means = fading.user_mean_gains()
    thresholds = np.asarray(rates.thresholds)
    rate_values = np.asarray(rates.rates)
    best_m = isinstance(scheme, BestMFeedback)
    if best_m and not 1 <= scheme.m <= s:
        raise ValueError("need 1 <= m <= subchannel count")

    rng = np.random.default_rng(seed)
    sums = np.zeros(len(rhos))
    sq_sums = np.zeros(len(rhos))
    done = 0
    chunk_size = _MC_CHUNK if not best_m else max(_MC_CHUNK // 8, 4096)
    while done < samples:
        n = min(chunk_size, samples - done)
        if best_m:
            h_all = _complex_normal(rng, (n, k, s))
            g_all = means[None, :, None] * np.abs(h_all) ** 2
            gains = g_all[:, :, 0]
            h = h_all[:, :, 0]
            # reported iff fewer than m of the user's own channels beat it
            rank = (g_all > g_all[:, :, 0:1]).sum(axis=2)
            reported = rank <= scheme.m - 1
        else:
            h = _complex_normal(rng, (n, k))
            gains = means[None, :] * np.abs(h) ** 2
            reported = gains >= scheme.threshold
        w = _complex_normal(rng, (n, k))
        rr_users = (done + np.arange(n)) % k
        pick, served = _schedule(scheduler, gains, reported, means[None, :],
                                 rr_users, rng)
        rows = np.arange(n)
        g_star = gains[rows, pick]
        h_star = h[rows, pick]
        w_star = w[rows, pick]
        mean_star = means[pick]
        region = np.searchsorted(thresholds, g_star, side="right") - 1
        has_rate = served & (region >= 0)
        safe_region = np.clip(region, 0, None)
        level = thresholds[safe_region]
        value_if_ok = rate_values[safe_region]
        for j, rho in enumerate(rhos):
            delayed = mean_star * np.abs(_mix_delayed(h_star, w_star, rho)) ** 2
            ok = has_rate & (delayed >= level)
            vals = np.where(ok, value_if_ok, 0.0)
            sums[j] += vals.sum()
            sq_sums[j] += (vals ** 2).sum()
        done += n
    mean_rate = sums / samples
    var = np.maximum(sq_sums / samples - mean_rate ** 2, 0.0)
    return mean_rate, np.sqrt(var / samples)


def cond_rate_mc(scheduler: SchedulerKind, scheme: FeedbackScheme,
                 fading: FadingParams, rates: RateTable, s: int, rho: float,
                 samples: int, seed: int = 0) -> CondRateResult:
    """Monte Carlo conditional mean rate at a single correlation."""
    mean, se = mc_rate_vs_delay(scheduler, scheme, fading, rates, s,
                                np.array([rho]), samples, seed)
    return CondRateResult(rate=float(mean[0]), error_estimate=float(se[0]))


# ---------------------------------------------------------------------------
# Network throughput assembly
# ---------------------------------------------------------------------------


class AnalyticSourceUnavailable(ValueError):
    """Closed forms only exist for the random scheduler."""


def _delay_axis(delay: DelayModel) -> np.ndarray:
    values: set[int] = set()
    for pmf in delay.delay_by_subframe.values():
        values.update(int(v) for v in pmf.values[pmf.probs > 0])
    return np.array(sorted(values))


def rate_by_delay(scheduler: SchedulerKind, scheme: FeedbackScheme,
                  fading: FadingParams, rates: RateTable, s: int,
                  delay: DelayModel, source: str = "analytic",
                  samples: int = 200_000, seed: int = 0) -> dict[int, float]:
    """Conditional mean rate for every reachable CSI age (in subframes)."""
    ages = _delay_axis(delay)
    rhos = np.array([
        correlation_coeff(a * delay.t_sb_us * 1e-6, fading.doppler_hz)
        for a in ages
    ])
    if source == "analytic":
        if scheduler is not SchedulerKind.RANDOM:
            raise AnalyticSourceUnavailable(
                f"no closed form for {scheduler.value}; use source='mc'")
        vals = [cond_rate_analytic(scheme, fading, rates, s, rho).rate
                for rho in rhos]
    elif source == "mc":
        vals, _ = mc_rate_vs_delay(scheduler, scheme, fading, rates, s,
                                   rhos, samples, seed)
    else:
        raise ValueError(f"unknown source {source!r}")
    return {int(a): float(v) for a, v in zip(ages, vals)}


def burst_rate_sum(delay: DelayModel, rate_of_age: dict[int, float]) -> float:
    """Sum over burst subframes of the collision-discounted mean rate."""
    total = 0.0
    for alpha, pmf in delay.delay_by_subframe.items():
        inner = sum(float(p) * rate_of_age[int(a)]
                    for a, p in zip(pmf.values, pmf.probs) if p > 0)
        total += (1.0 - delay.collision_prob(alpha)) * inner
    return total


def network_throughput(scheduler: SchedulerKind, scheme: FeedbackScheme,
                       fading: FadingParams, rates: RateTable,
                       bandwidth_hz: float, subchannels: int,
                       delay: DelayModel, source: str = "analytic",
                       samples: int = 200_000, seed: int = 0) -> float:
    """Mean downlink throughput in bits per second.

    Bits delivered per transaction pair (subframe time x band x summed
    conditional rates) divided by the mean pair duration.
    """
    rate_of_age = rate_by_delay(scheduler, scheme, fading, rates, subchannels,
                                delay, source=source, samples=samples, seed=seed)
    total = burst_rate_sum(delay, rate_of_age)
    return delay.t_sb_us * bandwidth_hz * total / delay.mean_cycle_us


def perfect_csi_throughput(scheduler: SchedulerKind, scheme: FeedbackScheme,
                           fading: FadingParams, rates: RateTable,
                           bandwidth_hz: float, subchannels: int,
                           delay: DelayModel, samples: int = 200_000,
                           seed: int = 0) -> float:
    """Throughput with zero-age CSI (identical current and delayed gains)."""
    res = cond_rate_mc(scheduler, scheme, fading, rates, subchannels,
                       rho=1.0, samples=samples, seed=seed)
    total = sum((1.0 - delay.collision_prob(alpha)) * res.rate *
                pmf.total_mass()
                for alpha, pmf in delay.delay_by_subframe.items())
    return delay.t_sb_us * bandwidth_hz * total / delay.mean_cycle_us


def normalized_decrease(value: float, baseline: float) -> float:
    """Relative throughput loss against a reference (0 = no loss)."""
    if baseline == 0:
        raise ZeroDivisionError("baseline throughput is zero")
    return (baseline - value) / baseline
