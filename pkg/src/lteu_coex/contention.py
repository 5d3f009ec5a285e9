"""Distribution of the LTE-U channel-contention duration and what follows
from it: pre-transmission subframe counts, CSI feedback delay, collision
probability of the first burst subframe, and mean transaction durations.

One contention episode: an initial inter-frame spacing, then a uniformly
drawn backoff counter is decremented once per channel observation.  An
observation is an idle slot, or a Wi-Fi busy period (success or collision)
followed by another inter-frame spacing and the decrement slot.  Everything
lives on a fixed microsecond lattice so that the counting measures below
(ceilings to subframe boundaries, residuals) stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mac import FixedPointSolution, MacParams, slot_event_probs, solve_fixed_point

DEFAULT_TAIL_EPS = 1e-6
_FFT_CW_CUTOFF = 128  # direct convolution below, spectral geometric series above


@dataclass(frozen=True)
class ContentionPmf:
    """Lattice distribution of one contention duration.

    probs[i] is the probability of duration i * grid_us; truncation_tail
    is the (tiny) mass trimmed off the far tail.
    """

    grid_us: float
    probs: np.ndarray
    truncation_tail: float

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)

    @property
    def times_us(self) -> np.ndarray:
        return np.arange(len(self.probs)) * self.grid_us

    def mean_us(self) -> float:
        # normalized by the kept mass so tail trimming cannot bias it
        return float(np.dot(self.times_us, self.probs) / self.probs.sum())

    def total_mass(self) -> float:
        return float(self.probs.sum()) + self.truncation_tail

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(times_us, probabilities) restricted to nonzero mass."""
        idx = np.nonzero(self.probs)[0]
        return idx * self.grid_us, self.probs[idx]


@dataclass(frozen=True)
class IntPmf:
    """Probability mass on consecutive integers start, start+1, ..."""

    start: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)

    @property
    def values(self) -> np.ndarray:
        return self.start + np.arange(len(self.probs))

    def mean(self) -> float:
        # normalized by the kept mass so tail trimming cannot bias it
        return float(np.dot(self.values, self.probs) / self.probs.sum())

    def total_mass(self) -> float:
        return float(self.probs.sum())


def _decrement_kernel(params: MacParams, fp: FixedPointSolution,
                      grid_us: float) -> np.ndarray:
    """Lattice pmf of one counter decrement (busy durations rounded)."""
    p_idle, p_succ, p_coll = slot_event_probs(params, fp)
    d_idle = int(round(params.slot_us / grid_us))
    d_succ = int(round((params.slot_us + params.wifi_success_us + params.difs_us) / grid_us))
    d_coll = int(round((params.slot_us + params.wifi_collision_us + params.difs_us) / grid_us))
    kernel = np.zeros(max(d_idle, d_succ, d_coll) + 1)
    kernel[d_idle] += p_idle
    kernel[d_succ] += p_succ
    kernel[d_coll] += p_coll
    return kernel


def _uniform_mixture_direct(kernel: np.ndarray, z: int) -> np.ndarray:
    """(1/z) * sum_{b=0..z-1} kernel^(*b) by sparse shifted adds."""
    steps = np.nonzero(kernel)[0]
    weights = kernel[steps]
    length = (z - 1) * (len(kernel) - 1) + 1
    acc = np.zeros(length)
    cur = np.zeros(length)
    cur[0] = 1.0
    acc[0] += 1.0 / z
    for _ in range(1, z):
        nxt = np.zeros(length)
        for step, w in zip(steps, weights):
            if step == 0:
                nxt += w * cur
            else:
                nxt[step:] += w * cur[:-step]
        cur = nxt
        acc += cur / z
    return acc


def _uniform_mixture_fft(kernel: np.ndarray, z: int) -> np.ndarray:
    """Same mixture through the spectral geometric series, for large z."""
    length = (z - 1) * (len(kernel) - 1) + 1
    n = 1 << int(np.ceil(np.log2(max(length, 2))))
    kh = np.fft.rfft(kernel, n)
    den = 1.0 - kh
    with np.errstate(divide="ignore", invalid="ignore"):
        series = np.where(np.abs(den) < 1e-9, z, (1.0 - kh ** z) / den) / z
    out = np.fft.irfft(series, n)[:length]
    np.clip(out, 0.0, None, out=out)
    out /= out.sum()
    return out


def _shift(probs: np.ndarray, steps: int) -> np.ndarray:
    if steps == 0:
        return probs
    out = np.zeros(len(probs) + steps)
    out[steps:] = probs
    return out


def _trim_tail(probs: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    """Drop trailing mass up to eps, returning (trimmed pmf, dropped mass)."""
    if eps <= 0:
        return probs, 0.0
    reverse_cum = np.cumsum(probs[::-1])
    keep = len(probs) - int(np.searchsorted(reverse_cum, eps, side="right"))
    keep = max(keep, int(np.nonzero(probs)[0][0]) + 1)
    dropped = float(probs[keep:].sum())
    return probs[:keep].copy(), dropped


@lru_cache(maxsize=256)
def _lattice_pmf_cached(params: MacParams, grid_us: float, eps: float) -> ContentionPmf:
    fp = solve_fixed_point(params)
    z = params.lteu_cw
    difs_steps = int(round(params.difs_us / grid_us))
    if params.wifi_stations == 0:
        # no freezes: uniform over {difs + b * slot}
        d_idle = int(round(params.slot_us / grid_us))
        probs = np.zeros((z - 1) * d_idle + 1)
        probs[::d_idle] = 1.0 / z
    else:
        kernel = _decrement_kernel(params, fp, grid_us)
        if z <= _FFT_CW_CUTOFF:
            probs = _uniform_mixture_direct(kernel, z)
        else:
            probs = _uniform_mixture_fft(kernel, z)
    probs, dropped = _trim_tail(_shift(probs, difs_steps), eps)
    return ContentionPmf(grid_us=grid_us, probs=probs, truncation_tail=dropped)


def _monte_carlo_pmf(params: MacParams, fp: FixedPointSolution, grid_us: float,
                     samples: int, seed: int) -> ContentionPmf:
    """Episode sampler for the same lattice model (per-event rounding)."""
    rng = np.random.default_rng(seed)
    p_idle, p_succ, p_coll = slot_event_probs(params, fp)
    d_idle = int(round(params.slot_us / grid_us))
    d_succ = int(round((params.slot_us + params.wifi_success_us + params.difs_us)
                       / grid_us))
    d_coll = int(round((params.slot_us + params.wifi_collision_us + params.difs_us)
                       / grid_us))
    b = rng.integers(0, params.lteu_cw, size=samples)
    n_succ = rng.binomial(b, p_succ) if p_succ > 0 else np.zeros(samples, dtype=int)
    rest = b - n_succ
    p_coll_given = p_coll / (1.0 - p_succ) if p_coll > 0 else 0.0
    n_coll = rng.binomial(rest, p_coll_given) if p_coll > 0 else np.zeros(samples, dtype=int)
    idx = (int(round(params.difs_us / grid_us))
           + (b - n_succ - n_coll) * d_idle + n_succ * d_succ + n_coll * d_coll)
    probs = np.bincount(idx).astype(float) / samples
    return ContentionPmf(grid_us=grid_us, probs=probs, truncation_tail=0.0)


def contention_pmf(params: MacParams, fp: FixedPointSolution | None = None,
                   mode: str = "lattice", grid_us: float = 1.0,
                   samples: int = 1_000_000, seed: int = 0,
                   eps: float = DEFAULT_TAIL_EPS) -> ContentionPmf:
    """Distribution of one contention duration; lattice or Monte Carlo."""
    if grid_us <= 0 or abs(params.slot_us / grid_us - round(params.slot_us / grid_us)) > 1e-9:
        raise ValueError(f"grid_us={grid_us} must divide the slot duration")
    if fp is None:
        fp = solve_fixed_point(params)
    if mode == "lattice":
        return _lattice_pmf_cached(params, grid_us, eps)
    if mode == "monte_carlo":
        if samples < 10_000:
            raise ValueError("monte_carlo mode needs at least 10^4 episodes")
        return _monte_carlo_pmf(params, fp, grid_us, samples, seed)
    raise ValueError(f"unknown mode {mode!r}")


def total_variation(a: ContentionPmf, b: ContentionPmf) -> float:
    if a.grid_us != b.grid_us:
        raise ValueError("pmfs live on different lattices")
    n = max(len(a.probs), len(b.probs))
    pa = np.pad(a.probs, (0, n - len(a.probs)))
    pb = np.pad(b.probs, (0, n - len(b.probs)))
    return 0.5 * float(np.abs(pa - pb).sum())


def _subframe_steps(pmf: ContentionPmf, t_sb_us: float) -> int:
    steps = t_sb_us / pmf.grid_us
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError("subframe duration must sit on the lattice")
    return int(round(steps))


def pretx_pmf(pmf: ContentionPmf, t_sb_us: float) -> IntPmf:
    """Pmf of the pre-transmission period in whole subframes.

    The node holds the channel from backoff completion to the next subframe
    boundary, so a contention of duration t occupies ceil(t / t_sb) subframes.
    """
    step = _subframe_steps(pmf, t_sb_us)
    idx = np.nonzero(pmf.probs)[0]
    b = -(-idx // step)          # ceil; support starts at difs > 0 so b >= 1
    b = np.maximum(b, 1)
    counts = np.bincount(b, weights=pmf.probs[idx])
    return IntPmf(start=1, probs=counts[1:].copy())


def mean_pretx_us(pmf: ContentionPmf, t_sb_us: float) -> float:
    return pretx_pmf(pmf, t_sb_us).mean() * t_sb_us


def mean_contention(pmf: ContentionPmf) -> float:
    """Mean contention duration in microseconds."""
    return pmf.mean_us()


def mean_reservation(pmf: ContentionPmf, t_sb_us: float) -> float:
    """Mean reservation fill: pre-transmission period minus contention."""
    return mean_pretx_us(pmf, t_sb_us) - pmf.mean_us()


def mean_tx_duration(pretx: IntPmf, n_sb: int, t_sb_us: float) -> float:
    """Mean length of one whole transmission: pre-tx period plus burst."""
    return pretx.mean() * t_sb_us + n_sb * t_sb_us


def feedback_delay_pmf(pretx: IntPmf, n_sb: int, alpha: int) -> IntPmf:
    """Pmf of the CSI age, in subframes, at burst subframe alpha.

    The age is the sum of two independent pre-transmission periods (uplink
    and downlink), the uplink burst, and the alpha-1 already-sent downlink
    subframes; its support therefore starts at n_sb + alpha + 1.
    """
    if not 1 <= alpha <= n_sb:
        raise ValueError(f"alpha must be in 1..{n_sb}")
    conv = np.convolve(pretx.probs, pretx.probs)
    return IntPmf(start=2 * pretx.start + n_sb + alpha - 1, probs=conv)


def collision_prob_first(pmf: ContentionPmf, t_sb_us: float, t_c_w_us: float,
                         p_lteu: float) -> float:
    """Probability the first burst subframe is hit by a Wi-Fi collision.

    A Wi-Fi transmission that starts exactly when the reservation does
    outlasts it whenever the residual to the subframe boundary is shorter
    than the collided-transmission duration.
    """
    if t_c_w_us >= t_sb_us:
        return p_lteu
    step = _subframe_steps(pmf, t_sb_us)
    idx = np.nonzero(pmf.probs)[0]
    residual = (-idx) % step            # lattice steps to the next boundary
    short = residual * pmf.grid_us < t_c_w_us
    return p_lteu * float(pmf.probs[idx[short]].sum())


@dataclass(frozen=True)
class DelayModel:
    """Everything the throughput and energy chains need about timing."""

    pretx: IntPmf                       # subframes of one pre-tx period
    delay_by_subframe: dict[int, IntPmf]  # alpha -> pmf of CSI age (subframes)
    mean_tx_dl_us: float
    mean_tx_ul_us: float
    mean_contention_us: float
    mean_reservation_us: float
    collision_first: float              # first-subframe collision probability
    n_sb: int
    t_sb_us: float

    def collision_prob(self, alpha: int) -> float:
        return self.collision_first if alpha == 1 else 0.0

    @property
    def mean_cycle_us(self) -> float:
        return self.mean_tx_dl_us + self.mean_tx_ul_us


def build_delay_model(params: MacParams, fp: FixedPointSolution | None = None,
                      mode: str = "lattice", grid_us: float = 1.0,
                      samples: int = 1_000_000, seed: int = 0,
                      eps: float = DEFAULT_TAIL_EPS) -> DelayModel:
    """Assemble the full delay model for one scenario."""
    if fp is None:
        fp = solve_fixed_point(params)
    pmf = contention_pmf(params, fp, mode=mode, grid_us=grid_us,
                         samples=samples, seed=seed, eps=eps)
    pre = pretx_pmf(pmf, params.subframe_us)
    delays = {alpha: feedback_delay_pmf(pre, params.burst_subframes, alpha)
              for alpha in range(1, params.burst_subframes + 1)}
    mean_tx = mean_tx_duration(pre, params.burst_subframes, params.subframe_us)
    return DelayModel(
        pretx=pre,
        delay_by_subframe=delays,
        mean_tx_dl_us=mean_tx,
        mean_tx_ul_us=mean_tx,
        mean_contention_us=mean_contention(pmf),
        mean_reservation_us=mean_reservation(pmf, params.subframe_us),
        collision_first=collision_prob_first(
            pmf, params.subframe_us, params.wifi_collision_us, fp.p_lteu),
        n_sb=params.burst_subframes,
        t_sb_us=params.subframe_us,
    )
