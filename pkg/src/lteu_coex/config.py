"""Scenario configuration: defaults, INI loading, and the rate-table file.

The built-in defaults reproduce the reference evaluation setting: a ten-user
LTE-U cell in a 20 MHz / 5.75 GHz channel split into twenty subchannels,
pedestrian mobility, 802.11ac Wi-Fi timing, and the fifteen-step LTE CQI
spectral-efficiency ladder.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .energy import PowerProfile
from .mac import MacParams
from .ratechan import (
    FadingParams,
    RateTable,
    db_to_linear,
    doppler_from_speed,
    rate_thresholds,
    threshold_for_feedback_prob,
)
from .throughput import BestMFeedback, FeedbackScheme, SchedulerKind, ThresholdFeedback

# 3GPP CQI spectral efficiencies (bits/s/Hz), QPSK 0.08 through 64QAM 0.93
CQI_RATES = (
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
    1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
    3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)
DEFAULT_CODING_LOSS = 0.398
DEFAULT_CARRIER_HZ = 5.75e9
DEFAULT_SPEED_KMH = 3.0


class ConfigError(ValueError):
    """Configuration file or field rejected, with the offending location."""


def default_rate_table(coding_loss: float = DEFAULT_CODING_LOSS) -> RateTable:
    return rate_thresholds(CQI_RATES, coding_loss)


def load_rate_table(path: str | Path,
                    coding_loss: float = DEFAULT_CODING_LOSS) -> RateTable:
    """Rate table file: one spectral efficiency per line, strictly increasing."""
    rates = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            rates.append(float(text))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: not a number: {text!r}") from exc
    if not rates:
        raise ConfigError(f"{path}: no rates found")
    try:
        return rate_thresholds(rates, coding_loss)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class NetworkConfig:
    """Everything one scenario needs, shared by analysis and simulation."""

    bandwidth_hz: float = 20e6
    subchannels: int = 20
    mac: MacParams = MacParams()
    fading: FadingParams = FadingParams(
        mean_gain_db=7.78,
        doppler_hz=doppler_from_speed(DEFAULT_SPEED_KMH, DEFAULT_CARRIER_HZ),
        user_count=10,
    )
    rates: RateTable = default_rate_table()
    power: PowerProfile = PowerProfile()
    scheme: FeedbackScheme = ThresholdFeedback(
        threshold_for_feedback_prob(0.2, db_to_linear(7.78)))
    scheduler: SchedulerKind = SchedulerKind.GREEDY
    rng_seed: int = 1

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ConfigError("bandwidth_hz must be > 0")
        if self.subchannels < 1:
            raise ConfigError("subchannels must be >= 1")
        if isinstance(self.scheme, BestMFeedback) and self.scheme.m > self.subchannels:
            raise ConfigError("best-m report count exceeds the subchannel count")

    @property
    def users(self) -> int:
        return self.fading.user_count

    def replace(self, **kwargs) -> "NetworkConfig":
        return replace(self, **kwargs)

    def with_wifi_stations(self, n_w: int) -> "NetworkConfig":
        return self.replace(mac=replace(self.mac, wifi_stations=n_w))

    def with_cw(self, z: int) -> "NetworkConfig":
        return self.replace(mac=self.mac.with_cw(z))


def reference_defaults(**overrides) -> NetworkConfig:
    """The reference scenario; keyword overrides replace whole fields."""
    return NetworkConfig(**overrides)


_SCHEDULERS = {s.value: s for s in SchedulerKind}


def _get(parser: configparser.ConfigParser, section: str, option: str,
         conv, fallback):
    if not parser.has_option(section, option):
        return fallback
    raw = parser.get(section, option)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {option} = {raw!r}: {exc}") from exc


def load_config(path: str | Path) -> NetworkConfig:
    """Read a scenario from an INI-style key-value document."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    base = NetworkConfig()
    g = lambda sec, opt, conv, fb: _get(parser, sec, opt, conv, fb)

    mac = MacParams(
        wifi_stations=g("wifi", "stations", int, base.mac.wifi_stations),
        wifi_min_cw=g("wifi", "min_cw", int, base.mac.wifi_min_cw),
        wifi_backoff_stages=g("wifi", "backoff_stages", int,
                              base.mac.wifi_backoff_stages),
        slot_us=g("wifi", "slot_us", float, base.mac.slot_us),
        wifi_success_us=g("wifi", "success_us", float, base.mac.wifi_success_us),
        wifi_collision_us=g("wifi", "collision_us", float,
                            base.mac.wifi_collision_us),
        difs_us=g("wifi", "difs_us", float, base.mac.difs_us),
        lteu_cw=g("lteu", "cw", int, base.mac.lteu_cw),
        subframe_us=g("lteu", "subframe_us", float, base.mac.subframe_us),
        burst_subframes=g("lteu", "burst_subframes", int,
                          base.mac.burst_subframes),
    )

    carrier = g("fading", "carrier_hz", float, DEFAULT_CARRIER_HZ)
    if parser.has_option("fading", "doppler_hz"):
        doppler = g("fading", "doppler_hz", float, None)
    else:
        doppler = doppler_from_speed(
            g("fading", "speed_kmh", float, DEFAULT_SPEED_KMH), carrier)
    fading = FadingParams(
        mean_gain_db=g("fading", "mean_gain_db", float,
                       base.fading.mean_gain_db),
        doppler_hz=doppler,
        user_count=g("fading", "users", int, base.fading.user_count),
        niid_ratio=g("fading", "niid_ratio", float, base.fading.niid_ratio),
    )

    coding_loss = g("rates", "coding_loss", float, DEFAULT_CODING_LOSS)
    if parser.has_option("rates", "file"):
        rates = load_rate_table(parser.get("rates", "file"), coding_loss)
    else:
        rates = default_rate_table(coding_loss)

    power = PowerProfile(
        sense_w=g("power", "sense_w", float, base.power.sense_w),
        reserve_w=g("power", "reserve_w", float, base.power.reserve_w),
        estimate_w=g("power", "estimate_w", float, base.power.estimate_w),
        receive_w=g("power", "receive_w", float, base.power.receive_w),
        basic_w=g("power", "basic_w", float, base.power.basic_w),
        report_bit_j=g("power", "report_bit_j", float,
                       base.power.report_bit_j),
    )

    sched_name = g("link", "scheduler", str, base.scheduler.value)
    if sched_name not in _SCHEDULERS:
        raise ConfigError(f"[link] scheduler = {sched_name!r}: "
                          f"expected one of {sorted(_SCHEDULERS)}")
    feedback_kind = g("link", "feedback", str, "threshold")
    if feedback_kind == "threshold":
        if parser.has_option("link", "feedback_prob"):
            lam = threshold_for_feedback_prob(
                g("link", "feedback_prob", float, None),
                fading.mean_gain_linear)
        else:
            lam = db_to_linear(g("link", "threshold_db", float, 9.85))
        scheme: FeedbackScheme = ThresholdFeedback(lam)
    elif feedback_kind == "best_m":
        scheme = BestMFeedback(g("link", "best_m", int, 5))
    else:
        raise ConfigError(f"[link] feedback = {feedback_kind!r}: "
                          "expected 'threshold' or 'best_m'")

    return NetworkConfig(
        bandwidth_hz=g("network", "bandwidth_hz", float, base.bandwidth_hz),
        subchannels=g("network", "subchannels", int, base.subchannels),
        mac=mac, fading=fading, rates=rates, power=power, scheme=scheme,
        scheduler=_SCHEDULERS[sched_name],
        rng_seed=g("network", "seed", int, base.rng_seed),
    )


def builtin_profile_path(name: str = "reference") -> Path:
    """Path of a profile shipped inside the package."""
    ref = resources.files("lteu_coex.data").joinpath(f"{name}.ini")
    with resources.as_file(ref) as p:
        return Path(p)
