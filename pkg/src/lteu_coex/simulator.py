"""Slot-level Monte Carlo of the full coexistence system.

Ground truth for the analytic chain: Wi-Fi stations run real binary
exponential backoff (not the mean-field approximation), the LTE-U link runs
fixed-window listen-before-talk, and every uplink/downlink transaction pair
carries channel estimation, CSI feedback, scheduling, rate adaptation, and
the user-side energy accounting.

Two stages per run: a pure-Python MAC loop in integer nanoseconds (event
ordering is exact and ceilings to subframe boundaries never suffer float
round-off), then a vectorized channel/scheduling stage over the recorded
per-transaction timings.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .config import NetworkConfig
from .throughput import BestMFeedback, SchedulerKind, ThresholdFeedback

_CHUNK = 4096


def sample_correlated_pair(mean: float, rho: float,
                           rng: np.random.Generator) -> tuple[float, float]:
    """One (gain, delayed gain) draw from the correlated Rayleigh-power law."""
    g, gd = sample_correlated_gains(mean, rho, 1, rng)
    return float(g[0]), float(gd[0])


def sample_correlated_gains(mean: float, rho: float, size,
                            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized correlated gain pairs; rho = 1 returns identical gains."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must be in [0, 1]")
    h = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)
    if rho >= 1.0:
        hd = h
    else:
        w = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)
        hd = math.sqrt(rho) * h + math.sqrt(1.0 - rho) * w
    return mean * np.abs(h) ** 2, mean * np.abs(hd) ** 2


@dataclass
class SimResult:
    """Measured statistics of one simulation run."""

    bursts: int
    throughput_bps: float
    throughput_se: float
    kappa: float                       # delivered bits per joule
    bits_total: float
    energy_basic_j: float
    energy_uplink_j: float
    energy_downlink_j: float
    energy_total_j: float
    wifi_occupancy: float
    wifi_occupancy_se: float
    first_collision_rate: float
    first_collision_se: float
    tau_wifi_hat: float
    tau_lteu_hat: float
    p_lteu_hat: float
    p_lteu_se: float
    delay_counts: dict[int, dict[int, int]]   # alpha -> {age subframes: count}
    user_service_counts: np.ndarray
    slots_observed: int
    wall_time_s: float
    mean_contention_us: float
    trace: tuple[dict, ...] = field(default_factory=tuple)

    @property
    def energy_components_j(self) -> tuple[float, float, float]:
        return (self.energy_basic_j, self.energy_uplink_j, self.energy_downlink_j)


class _WifiPool:
    """Binary-exponential-backoff state of the Wi-Fi stations."""

    __slots__ = ("n", "min_cw", "stages", "counters", "stage", "rng",
                 "tx_total", "tx_collided")

    def __init__(self, n: int, min_cw: int, stages: int, rng: random.Random):
        self.n = n
        self.min_cw = min_cw
        self.stages = stages
        self.rng = rng
        self.counters = [rng.randrange(min_cw) for _ in range(n)]
        self.stage = [0] * n
        self.tx_total = 0
        self.tx_collided = 0

    def transmitters(self) -> list[int]:
        return [i for i in range(self.n) if self.counters[i] == 0]

    def settle(self, tx: list[int], collided: bool) -> None:
        for i in tx:
            self.tx_total += 1
            if collided:
                self.tx_collided += 1
                self.stage[i] = min(self.stage[i] + 1, self.stages)
            else:
                self.stage[i] = 0
            self.counters[i] = self.rng.randrange(self.min_cw << self.stage[i])

    def decrement_all(self) -> None:
        for i in range(self.n):
            self.counters[i] -= 1


@dataclass
class _PhaseStats:
    contention_ns: int = 0
    pretx_subframes: int = 0
    collided_first: bool = False
    wifi_success_ns: int = 0


def _contend(wifi: _WifiPool, z: int, ns: dict[str, int], rng: random.Random,
             counters: dict[str, int]) -> _PhaseStats:
    """One LTE-U contention phase; advances the shared Wi-Fi state."""
    t = ns["difs"]
    ws_time = 0
    b = rng.randrange(z)
    while True:
        tx = wifi.transmitters()
        counters["slots"] += 1
        counters["wifi_tx"] += len(tx)
        if not tx and b > 0:
            counters["idle_slots"] += 1
        if b == 0:
            counters["accesses"] += 1
            collided = bool(tx)
            if collided:
                counters["collided_accesses"] += 1
                wifi.settle(tx, collided=True)
            pre_sub = -(-t // ns["subframe"])      # ceil to the boundary
            residual = pre_sub * ns["subframe"] - t
            return _PhaseStats(
                contention_ns=t,
                pretx_subframes=pre_sub,
                collided_first=collided and ns["collision"] > residual,
                wifi_success_ns=ws_time,
            )
        if tx:
            if len(tx) == 1:
                wifi.settle(tx, collided=False)
                ws_time += ns["success"]
                t += ns["success"] + ns["difs"]
            else:
                wifi.settle(tx, collided=True)
                t += ns["collision"] + ns["difs"]
        else:
            t += ns["slot"]
            wifi.decrement_all()
            b -= 1


def _feedback_table(cfg: NetworkConfig) -> np.ndarray:
    """Report energy (J) by number of reported subchannels."""
    from .energy import feedback_energy
    return np.array([feedback_energy(d, cfg.subchannels, cfg.power.report_bit_j)
                     for d in range(cfg.subchannels + 1)])


def run_sim(cfg: NetworkConfig, bursts: int, collect_trace: bool = False) -> SimResult:
    """Simulate `bursts` uplink/downlink transaction pairs."""
    if bursts < 1:
        raise ValueError("bursts must be >= 1")
    mac = cfg.mac
    ns = {
        "slot": round(mac.slot_us * 1000),
        "success": round(mac.wifi_success_us * 1000),
        "collision": round(mac.wifi_collision_us * 1000),
        "difs": round(mac.difs_us * 1000),
        "subframe": round(mac.subframe_us * 1000),
    }
    rng_mac = random.Random(cfg.rng_seed)
    rng_ch = np.random.default_rng(cfg.rng_seed)
    wifi = _WifiPool(mac.wifi_stations, mac.wifi_min_cw,
                     mac.wifi_backoff_stages, rng_mac)
    counters = {"slots": 0, "wifi_tx": 0, "idle_slots": 0,
                "accesses": 0, "collided_accesses": 0}

    # stage 1: MAC timeline
    n_sb = mac.burst_subframes
    b_ul = np.empty(bursts, dtype=np.int64)
    b_dl = np.empty(bursts, dtype=np.int64)
    t_ul_ns = np.empty(bursts, dtype=np.int64)
    t_dl_ns = np.empty(bursts, dtype=np.int64)
    coll_dl = np.empty(bursts, dtype=bool)
    ws_ns = np.empty(bursts, dtype=np.int64)
    collided_firsts = 0
    for i in range(bursts):
        ul = _contend(wifi, mac.lteu_cw, ns, rng_mac, counters)
        dl = _contend(wifi, mac.lteu_cw, ns, rng_mac, counters)
        b_ul[i] = ul.pretx_subframes
        b_dl[i] = dl.pretx_subframes
        t_ul_ns[i] = ul.contention_ns
        t_dl_ns[i] = dl.contention_ns
        coll_dl[i] = dl.collided_first
        collided_firsts += int(ul.collided_first) + int(dl.collided_first)
        ws_ns[i] = ul.wifi_success_ns + dl.wifi_success_ns

    cycle_sub = b_ul + b_dl + 2 * n_sb                 # whole pair, subframes
    wall_ns = int(cycle_sub.sum()) * ns["subframe"]

    # stage 2: channel, scheduling, rate adaptation, energy
    k, s = cfg.users, cfg.subchannels
    means = cfg.fading.user_mean_gains()
    thresholds = np.asarray(cfg.rates.thresholds)
    rate_values = np.asarray(cfg.rates.rates)
    t_sb_s = mac.subframe_us * 1e-6
    subch_bw = cfg.bandwidth_hz / s
    xi_table = _feedback_table(cfg)
    best_m = isinstance(cfg.scheme, BestMFeedback)

    # CSI age at burst subframe alpha: both pre-tx periods, the uplink
    # burst, and the alpha-1 downlink subframes already sent
    ages = b_ul[:, None] + b_dl[:, None] + n_sb + np.arange(n_sb)[None, :]
    uniq_ages = np.unique(ages)
    rho_lut = np.zeros(int(uniq_ages.max()) + 1)
    rho_lut[uniq_ages] = special.j0(
        2 * math.pi * cfg.fading.doppler_hz * uniq_ages * t_sb_s) ** 2

    bits_per_burst = np.zeros(bursts)
    fb_per_burst = np.zeros(bursts)       # CSI-report energy, J
    rx_per_burst = np.zeros(bursts)       # reception energy, J
    service_counts = np.zeros(k, dtype=np.int64)

    for lo in range(0, bursts, _CHUNK):
        hi = min(lo + _CHUNK, bursts)
        n = hi - lo
        h = (rng_ch.standard_normal((n, k, s))
             + 1j * rng_ch.standard_normal((n, k, s))) / math.sqrt(2)
        gains = means[None, :, None] * np.abs(h) ** 2
        if best_m:
            order = np.argsort(gains, axis=2)[:, :, ::-1]
            reported = np.zeros_like(gains, dtype=bool)
            np.put_along_axis(reported, order[:, :, :cfg.scheme.m], True, axis=2)
        else:
            reported = gains >= cfg.scheme.threshold
        any_rep = reported.any(axis=1)                       # (n, s)

        if cfg.scheduler is SchedulerKind.GREEDY:
            keyed = np.where(reported, gains, -np.inf)
            pick = np.argmax(keyed, axis=1)
        elif cfg.scheduler is SchedulerKind.PROPORTIONAL_FAIR:
            keyed = np.where(reported, gains / means[None, :, None], -np.inf)
            pick = np.argmax(keyed, axis=1)
        elif cfg.scheduler is SchedulerKind.RANDOM:
            keyed = np.where(reported, rng_ch.random(gains.shape), -1.0)
            pick = np.argmax(keyed, axis=1)
        else:  # round robin: one user per transaction, served where they reported
            turn = (lo + np.arange(n)) % k
            pick = np.broadcast_to(turn[:, None], (n, s)).copy()
            any_rep = reported[np.arange(n)[:, None], pick, np.arange(s)[None, :]]

        rows = np.arange(n)[:, None]
        cols = np.arange(s)[None, :]
        g_star = gains[rows, pick, cols]
        h_star = h[rows, pick, cols]
        mean_star = means[pick]
        region = np.searchsorted(thresholds, g_star, side="right") - 1
        has_rate = any_rep & (region >= 0)
        safe = np.clip(region, 0, None)
        level = thresholds[safe]
        rate = rate_values[safe]

        np.add.at(service_counts, pick[any_rep], 1)

        rho = rho_lut[ages[lo:hi]]
        chunk_bits = np.zeros(n)
        for alpha in range(1, n_sb + 1):
            r = rho[:, alpha - 1][:, None]
            w = (rng_ch.standard_normal((n, s))
                 + 1j * rng_ch.standard_normal((n, s))) / math.sqrt(2)
            hd = np.sqrt(r) * h_star + np.sqrt(1.0 - r) * w
            gd = mean_star * np.abs(hd) ** 2
            ok = has_rate & (gd >= level)
            if alpha == 1:
                ok = ok & ~coll_dl[lo:hi, None]
            chunk_bits += (rate * ok).sum(axis=1) * subch_bw * t_sb_s
        bits_per_burst[lo:hi] = chunk_bits

        if best_m:
            fb_per_burst[lo:hi] = k * float(xi_table[cfg.scheme.m])
        else:
            fb_per_burst[lo:hi] = xi_table[reported.sum(axis=2)].sum(axis=1)
        rx_per_burst[lo:hi] = (cfg.power.receive_w * t_sb_s * n_sb / s
                               * any_rep.sum(axis=1))

    # energy accounting (J), per burst then totalled
    p = cfg.power
    ul_res_s = (b_ul * ns["subframe"] - t_ul_ns) * 1e-9
    e_ul_burst = (k * (p.sense_w * t_ul_ns * 1e-9 + p.reserve_w * ul_res_s)
                  + fb_per_burst)
    e_dl_burst = (k * p.sense_w * b_dl * ns["subframe"] * 1e-9
                  + rx_per_burst + k * p.estimate_w * t_sb_s)
    e_basic_burst = k * p.basic_w * cycle_sub * ns["subframe"] * 1e-9
    e_basic = float(e_basic_burst.sum())
    e_uplink = float(e_ul_burst.sum())
    e_downlink = float(e_dl_burst.sum())
    e_total = e_basic + e_uplink + e_downlink

    trace_rows: list[dict] = []
    if collect_trace:
        joules = e_basic_burst + e_ul_burst + e_dl_burst
        for i in range(bursts):
            trace_rows.append({
                "burst": i,
                "ul_pretx_subframes": int(b_ul[i]),
                "dl_pretx_subframes": int(b_dl[i]),
                "bits": float(bits_per_burst[i]),
                "joules": float(joules[i]),
            })

    # delay histogram per burst subframe
    delay_counts: dict[int, dict[int, int]] = {}
    for alpha in range(1, n_sb + 1):
        vals, cnts = np.unique(ages[:, alpha - 1], return_counts=True)
        delay_counts[alpha] = {int(v): int(c) for v, c in zip(vals, cnts)}

    wall_s = wall_ns * 1e-9
    duration_s = cycle_sub.astype(float) * (ns["subframe"] * 1e-9)
    throughput = float(bits_per_burst.sum()) / wall_s
    resid = bits_per_burst - throughput * duration_s
    se = (float(np.std(resid, ddof=1)) / math.sqrt(bursts)
          / float(duration_s.mean())) if bursts > 1 else float("nan")

    occupancy = float(ws_ns.sum()) / wall_ns
    occ_resid = ws_ns - occupancy * cycle_sub.astype(float) * ns["subframe"]
    occupancy_se = (float(np.std(occ_resid, ddof=1)) / math.sqrt(bursts)
                    / (float(cycle_sub.mean()) * ns["subframe"])
                    if bursts > 1 else float("nan"))

    phases = 2 * bursts
    pc1 = collided_firsts / phases
    pl_hat = counters["collided_accesses"] / max(counters["accesses"], 1)

    return SimResult(
        bursts=bursts,
        throughput_bps=throughput,
        throughput_se=se,
        kappa=float(bits_per_burst.sum()) / e_total,
        bits_total=float(bits_per_burst.sum()),
        energy_basic_j=e_basic,
        energy_uplink_j=e_uplink,
        energy_downlink_j=e_downlink,
        energy_total_j=e_total,
        wifi_occupancy=occupancy,
        wifi_occupancy_se=occupancy_se,
        first_collision_rate=pc1,
        first_collision_se=math.sqrt(max(pc1 * (1 - pc1), 1e-12) / phases),
        # per-slot transmit frequencies over decrement opportunities: an
        # idle slot is one opportunity for every counter, a transmission
        # is one for each transmitter, frozen counters get none
        tau_wifi_hat=(counters["wifi_tx"]
                      / (counters["idle_slots"] * mac.wifi_stations
                         + counters["wifi_tx"])
                      if mac.wifi_stations else 0.0),
        tau_lteu_hat=(counters["accesses"]
                      / (counters["idle_slots"] + counters["accesses"])),
        p_lteu_hat=pl_hat,
        p_lteu_se=math.sqrt(max(pl_hat * (1 - pl_hat), 1e-12)
                            / max(counters["accesses"], 1)),
        delay_counts=delay_counts,
        user_service_counts=service_counts,
        slots_observed=counters["slots"],
        wall_time_s=wall_s,
        mean_contention_us=float((t_ul_ns.sum() + t_dl_ns.sum())
                                 / (2 * bursts) * 1e-3),
        trace=tuple(trace_rows),
    )
