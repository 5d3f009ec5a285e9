"""Command-line front end: scenario reports, sweeps, and simulation runs.

Every command writes RFC-4180 CSV (header row, '.' decimal separator) and,
unless --no-figures is given, a PNG rendering next to each CSV.  Outputs are
deterministic for a fixed config and seed; partially written files are
removed if a run fails.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import figures
from .config import ConfigError, NetworkConfig, load_config, reference_defaults
from .contention import build_delay_model, contention_pmf
from .energy import energy_efficiency
from .mac import solve_fixed_point, wifi_occupancy_ratio
from .optimize import OptimizerConfig, optimize_bm, optimize_th
from .ratechan import (
    db_to_linear,
    doppler_from_speed,
    linear_to_db,
    threshold_for_feedback_prob,
)
from .simulator import run_sim
from .throughput import (
    BestMFeedback,
    SchedulerKind,
    ThresholdFeedback,
    network_throughput,
)

SWEEP_KINDS = ("fixed_point", "throughput", "ee", "optimize", "simulate")

_AXIS_NAMES = ("nw", "z", "rho_fb", "threshold_db", "best_m", "speed_kmh",
               "scheduler")


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a metric kind evaluated over a grid of config axes."""

    kind: str
    axes: tuple[tuple[str, tuple], ...]   # (name, values), outer-product order
    out_dir: Path
    source: str = "mc"
    samples: int = 200_000
    bursts: int = 5000
    jobs: int = 1
    figures: bool = True
    d_th: float | None = None
    restarts: int = 3
    exhaustive: bool = False

    def __post_init__(self) -> None:
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}")
        if not self.axes:
            raise ConfigError("sweep needs at least one axis")
        for name, values in self.axes:
            if name not in _AXIS_NAMES:
                raise ConfigError(f"unknown axis {name!r}; "
                                  f"expected one of {_AXIS_NAMES}")
            if len(values) == 0:
                raise ConfigError(f"axis {name!r} is empty")


class _Outputs:
    """Tracks written files so failures leave no partial outputs."""

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def register(self, path: Path) -> Path:
        self.paths.append(path)
        return path

    def discard_all(self) -> None:
        for p in self.paths:
            p.unlink(missing_ok=True)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, float):
        if not np.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in CSV output")
        return repr(v)
    return v


def _apply_axis(cfg: NetworkConfig, name: str, value) -> NetworkConfig:
    if name == "nw":
        return cfg.with_wifi_stations(int(value))
    if name == "z":
        return cfg.with_cw(int(value))
    if name == "rho_fb":
        lam = threshold_for_feedback_prob(float(value),
                                          cfg.fading.mean_gain_linear)
        return cfg.replace(scheme=ThresholdFeedback(lam))
    if name == "threshold_db":
        return cfg.replace(scheme=ThresholdFeedback(db_to_linear(float(value))))
    if name == "best_m":
        return cfg.replace(scheme=BestMFeedback(int(value)))
    if name == "speed_kmh":
        doppler = doppler_from_speed(float(value), 5.75e9)
        return cfg.replace(fading=replace(cfg.fading, doppler_hz=doppler))
    if name == "scheduler":
        return cfg.replace(scheduler=SchedulerKind(str(value)))
    raise ConfigError(f"unknown axis {name!r}")


def _scheme_columns(cfg: NetworkConfig) -> dict:
    if isinstance(cfg.scheme, BestMFeedback):
        return {"feedback": "best_m", "param": cfg.scheme.m}
    return {"feedback": "threshold",
            "param": round(linear_to_db(cfg.scheme.threshold), 6)
            if cfg.scheme.threshold > 0 else -np.inf}


def _default_d_th(cfg: NetworkConfig) -> float:
    n_w = cfg.mac.wifi_stations
    return n_w / (cfg.users + n_w)


def _point_fixed_point(cfg: NetworkConfig, spec: ExperimentSpec) -> dict:
    fp = solve_fixed_point(cfg.mac)
    return {
        "nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
        **fp.as_dict(),
        "wifi_occupancy": wifi_occupancy_ratio(cfg.mac, fp),
    }


def _point_throughput(cfg: NetworkConfig, spec: ExperimentSpec) -> dict:
    delay = build_delay_model(cfg.mac)
    value = network_throughput(
        cfg.scheduler, cfg.scheme, cfg.fading, cfg.rates, cfg.bandwidth_hz,
        cfg.subchannels, delay, source=spec.source, samples=spec.samples,
        seed=cfg.rng_seed)
    return {"nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
            "scheduler": cfg.scheduler.value, **_scheme_columns(cfg),
            "throughput_mbps": value / 1e6}


def _point_ee(cfg: NetworkConfig, spec: ExperimentSpec) -> dict:
    delay = build_delay_model(cfg.mac)
    ee = energy_efficiency(
        cfg.scheduler, cfg.scheme, cfg.fading, cfg.rates, cfg.power,
        cfg.bandwidth_hz, cfg.subchannels, delay, source=spec.source,
        samples=spec.samples, seed=cfg.rng_seed)
    return {"nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
            "scheduler": cfg.scheduler.value, **_scheme_columns(cfg),
            "bits_per_burst": ee.bits_delivered,
            "energy_basic_j": ee.basic_j, "energy_uplink_j": ee.uplink_j,
            "energy_downlink_j": ee.downlink_j,
            "kappa_mbit_per_j": ee.kappa / 1e6}


def _point_optimize(cfg: NetworkConfig, spec: ExperimentSpec) -> dict:
    opt_cfg = OptimizerConfig(restarts=spec.restarts)
    d_th = spec.d_th if spec.d_th is not None else _default_d_th(cfg)
    kwargs = dict(source=spec.source, samples=spec.samples, seed=cfg.rng_seed)
    if isinstance(cfg.scheme, BestMFeedback):
        res = optimize_bm(cfg.mac, cfg.fading, cfg.rates, cfg.power,
                          cfg.bandwidth_hz, cfg.subchannels, d_th, opt_cfg,
                          scheduler=cfg.scheduler, **kwargs)
        param = {"m_star": res.m_star}
    else:
        res = optimize_th(cfg.mac, cfg.fading, cfg.rates, cfg.power,
                          cfg.bandwidth_hz, cfg.subchannels, d_th, opt_cfg,
                          scheduler=cfg.scheduler,
                          exhaustive=spec.exhaustive, **kwargs)
        param = {"lambda_star_db": res.lambda_star_db}
    return {"nw": cfg.mac.wifi_stations, "d_th": d_th, **param,
            "z_star": res.z_star, "kappa_star_mbit_per_j": res.kappa_star,
            "wifi_occupancy": res.occupancy}


def _point_simulate(cfg: NetworkConfig, spec: ExperimentSpec) -> dict:
    res = run_sim(cfg, spec.bursts)
    return {"nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
            "scheduler": cfg.scheduler.value, **_scheme_columns(cfg),
            "bursts": res.bursts, "throughput_mbps": res.throughput_bps / 1e6,
            "throughput_se_mbps": res.throughput_se / 1e6,
            "kappa_mbit_per_j": res.kappa / 1e6,
            "wifi_occupancy": res.wifi_occupancy,
            "first_collision_rate": res.first_collision_rate}


_POINT_FNS = {
    "fixed_point": _point_fixed_point,
    "throughput": _point_throughput,
    "ee": _point_ee,
    "optimize": _point_optimize,
    "simulate": _point_simulate,
}


def _sweep_point(args: tuple) -> dict:
    cfg, spec, assignment = args
    for name, value in assignment:
        cfg = _apply_axis(cfg, name, value)
    row = dict(assignment)
    row.update(_POINT_FNS[spec.kind](cfg, spec))
    return row


def run_experiment(spec: ExperimentSpec, cfg: NetworkConfig) -> list[Path]:
    """Run a sweep, write its CSV (and figure), return the written paths."""
    out = _Outputs()
    try:
        spec.out_dir.mkdir(parents=True, exist_ok=True)
        names = [name for name, _ in spec.axes]
        grids = [values for _, values in spec.axes]
        assignments = [tuple(zip(names, combo))
                       for combo in itertools.product(*grids)]
        tasks = [(cfg, spec, a) for a in assignments]
        if spec.jobs > 1:
            with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
                rows = list(pool.map(_sweep_point, tasks))
        else:
            rows = [_sweep_point(t) for t in tasks]
        for row in rows:
            summary = " ".join(f"{k}={row[k]}" for k in list(row)[:6])
            print(f"[{spec.kind}] {summary}")

        header = list(rows[0].keys())
        csv_path = out.register(spec.out_dir / f"sweep_{spec.kind}.csv")
        _write_csv(csv_path, header, [[row[h] for h in header] for row in rows])
        paths = [csv_path]
        if spec.figures and len(names) >= 1:
            y_key = _sweep_metric_column(spec.kind)
            if y_key in header:
                fig_path = out.register(spec.out_dir / f"sweep_{spec.kind}.png")
                series = names[1] if len(names) > 1 else None
                figures.plot_sweep(rows, names[0], [y_key], series, fig_path,
                                   f"{spec.kind} sweep", y_key)
                paths.append(fig_path)
        return paths
    except BaseException:
        out.discard_all()
        raise


def _sweep_metric_column(kind: str) -> str:
    return {
        "fixed_point": "wifi_occupancy",
        "throughput": "throughput_mbps",
        "ee": "kappa_mbit_per_j",
        "optimize": "kappa_star_mbit_per_j",
        "simulate": "throughput_mbps",
    }[kind]


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lteu-coex",
        description="LTE-U / Wi-Fi coexistence performance toolkit")
    parser.add_argument("--config", type=Path, default=None,
                        help="scenario INI file (default: built-in profile)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario RNG seed")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default: ./out)")
    parser.add_argument("--no-figures", action="store_true",
                        help="write CSV only, skip PNG rendering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixed-point", help="contention fixed point and occupancy")
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--z", type=int, default=None)

    p = sub.add_parser("pmf", help="contention-duration distribution")
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--z", type=int, default=None)
    p.add_argument("--mode", choices=("lattice", "mc"), default="lattice")
    p.add_argument("--samples", type=int, default=1_000_000)

    p = sub.add_parser("throughput", help="mean downlink throughput")
    p.add_argument("--source", choices=("analytic", "mc"), default="mc")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--z", type=int, default=None)

    p = sub.add_parser("ee", help="users' energy efficiency")
    p.add_argument("--source", choices=("analytic", "mc"), default="mc")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--z", type=int, default=None)

    p = sub.add_parser("optimize", help="coexistence-aware EE optimization")
    p.add_argument("--source", choices=("analytic", "mc"), default="mc")
    p.add_argument("--samples", type=int, default=150_000)
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--d-th", type=float, default=None,
                   help="Wi-Fi occupancy floor (default nw/(users+nw))")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--exhaustive", action="store_true",
                   help="grid search instead of gradient ascent")

    p = sub.add_parser("simulate", help="slot-level Monte Carlo run")
    p.add_argument("--bursts", type=int, default=5000)
    p.add_argument("--trace", action="store_true",
                   help="write per-burst newline-delimited records")
    p.add_argument("--nw", type=int, default=None)
    p.add_argument("--z", type=int, default=None)

    p = sub.add_parser("sweep", help="evaluate a metric over config axes")
    p.add_argument("--kind", choices=SWEEP_KINDS, required=True)
    p.add_argument("--axis", action="append", default=[],
                   metavar="NAME=V1,V2,...",
                   help=f"sweep axis; names: {', '.join(_AXIS_NAMES)}")
    p.add_argument("--source", choices=("analytic", "mc"), default="mc")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--bursts", type=int, default=5000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--d-th", type=float, default=None)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--exhaustive", action="store_true")
    return parser


def _load_scenario(args) -> NetworkConfig:
    cfg = load_config(args.config) if args.config else reference_defaults()
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    nw = getattr(args, "nw", None)
    if nw is not None:
        cfg = cfg.with_wifi_stations(nw)
    z = getattr(args, "z", None)
    if z is not None:
        cfg = cfg.with_cw(z)
    return cfg


def _parse_axis(text: str) -> tuple[str, tuple]:
    if "=" not in text:
        raise ConfigError(f"axis {text!r}: expected NAME=V1,V2,...")
    name, _, values = text.partition("=")
    name = name.strip()
    items = [v.strip() for v in values.split(",") if v.strip()]
    if name == "scheduler":
        return name, tuple(items)
    conv = int if name in ("nw", "z", "best_m") else float
    try:
        return name, tuple(conv(v) for v in items)
    except ValueError as exc:
        raise ConfigError(f"axis {text!r}: {exc}") from exc


def _cmd_fixed_point(args, cfg: NetworkConfig) -> int:
    out = _Outputs()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        fp = solve_fixed_point(cfg.mac)
        occupancy = wifi_occupancy_ratio(cfg.mac, fp)
        row = {"nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
               **fp.as_dict(), "wifi_occupancy": occupancy}
        path = out.register(args.out / "fixed_point.csv")
        _write_csv(path, list(row), [list(row.values())])
        print(f"tau_wifi={fp.tau_wifi:.6f} tau_lteu={fp.tau_lteu:.6f} "
              f"p_lteu={fp.p_lteu:.6f} wifi_occupancy={occupancy:.4f}")
        print(f"wrote {path}")
        return 0
    except BaseException:
        out.discard_all()
        raise


def _cmd_pmf(args, cfg: NetworkConfig) -> int:
    out = _Outputs()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        mode = "monte_carlo" if args.mode == "mc" else "lattice"
        pmf = contention_pmf(cfg.mac, mode=mode, samples=args.samples,
                             seed=cfg.rng_seed)
        times, probs = pmf.support()
        path = out.register(args.out / f"contention_pmf_{args.mode}.csv")
        _write_csv(path, ["time_us", "probability"],
                   [[float(t), float(p)] for t, p in zip(times, probs)])
        print(f"support {times[0]:.0f}..{times[-1]:.0f} us, "
              f"mean {pmf.mean_us():.1f} us, tail {pmf.truncation_tail:.2e}")
        written = [path]
        if not args.no_figures:
            fig = out.register(args.out / f"contention_pmf_{args.mode}.png")
            figures.plot_pmf(times, probs, fig,
                             f"contention duration (nw={cfg.mac.wifi_stations}, "
                             f"z={cfg.mac.lteu_cw})")
            written.append(fig)
        for p in written:
            print(f"wrote {p}")
        return 0
    except BaseException:
        out.discard_all()
        raise


def _one_point_command(args, cfg: NetworkConfig, kind: str) -> int:
    out = _Outputs()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        spec = ExperimentSpec(kind=kind, axes=(("nw", (cfg.mac.wifi_stations,)),),
                              out_dir=args.out,
                              source=getattr(args, "source", "mc"),
                              samples=getattr(args, "samples", 200_000),
                              figures=False,
                              d_th=getattr(args, "d_th", None),
                              restarts=getattr(args, "restarts", 3),
                              exhaustive=getattr(args, "exhaustive", False))
        row = _POINT_FNS[kind](cfg, spec)
        path = out.register(args.out / f"{kind}.csv")
        _write_csv(path, list(row), [list(row.values())])
        print(" ".join(f"{k}={v}" for k, v in row.items()))
        print(f"wrote {path}")
        return 0
    except BaseException:
        out.discard_all()
        raise


def _cmd_optimize(args, cfg: NetworkConfig) -> int:
    out = _Outputs()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        spec = ExperimentSpec(kind="optimize",
                              axes=(("nw", (cfg.mac.wifi_stations,)),),
                              out_dir=args.out, source=args.source,
                              samples=args.samples, d_th=args.d_th,
                              restarts=args.restarts,
                              exhaustive=args.exhaustive, figures=False)
        opt_cfg = OptimizerConfig(restarts=args.restarts)
        d_th = args.d_th if args.d_th is not None else _default_d_th(cfg)
        if isinstance(cfg.scheme, BestMFeedback):
            res = optimize_bm(cfg.mac, cfg.fading, cfg.rates, cfg.power,
                              cfg.bandwidth_hz, cfg.subchannels, d_th, opt_cfg,
                              scheduler=cfg.scheduler, source=args.source,
                              samples=args.samples, seed=cfg.rng_seed)
            x_label = "reports m"
        else:
            res = optimize_th(cfg.mac, cfg.fading, cfg.rates, cfg.power,
                              cfg.bandwidth_hz, cfg.subchannels, d_th, opt_cfg,
                              scheduler=cfg.scheduler, source=args.source,
                              samples=args.samples, seed=cfg.rng_seed,
                              exhaustive=args.exhaustive)
            x_label = "threshold (dB)"
        row = {"nw": cfg.mac.wifi_stations, "d_th": d_th,
               "lambda_star_db": res.lambda_star_db, "m_star": res.m_star,
               "z_star": res.z_star,
               "kappa_star_mbit_per_j": res.kappa_star,
               "wifi_occupancy": res.occupancy}
        path = out.register(args.out / "optimize.csv")
        _write_csv(path, list(row), [list(row.values())])
        trace_path = out.register(args.out / "optimize_trace.csv")
        _write_csv(trace_path, ["iteration", "parameter", "kappa_mbit_per_j"],
                   [[i, float(x), float(v)]
                    for i, (x, v) in enumerate(res.trace)])
        written = [path, trace_path]
        if not args.no_figures:
            fig = out.register(args.out / "optimize_trace.png")
            figures.plot_trace(res.trace, fig, "search trace", x_label)
            written.append(fig)
        print(" ".join(f"{k}={v}" for k, v in row.items()))
        for p in written:
            print(f"wrote {p}")
        return 0
    except BaseException:
        out.discard_all()
        raise


def _cmd_simulate(args, cfg: NetworkConfig) -> int:
    out = _Outputs()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        res = run_sim(cfg, args.bursts, collect_trace=args.trace)
        row = {
            "nw": cfg.mac.wifi_stations, "z": cfg.mac.lteu_cw,
            "scheduler": cfg.scheduler.value, **_scheme_columns(cfg),
            "bursts": res.bursts,
            "throughput_mbps": res.throughput_bps / 1e6,
            "throughput_se_mbps": res.throughput_se / 1e6,
            "kappa_mbit_per_j": res.kappa / 1e6,
            "bits_total": res.bits_total,
            "energy_total_j": res.energy_total_j,
            "wifi_occupancy": res.wifi_occupancy,
            "first_collision_rate": res.first_collision_rate,
            "tau_wifi_hat": res.tau_wifi_hat,
            "tau_lteu_hat": res.tau_lteu_hat,
        }
        path = out.register(args.out / "simulate.csv")
        _write_csv(path, list(row), [list(row.values())])
        delays_path = out.register(args.out / "simulate_delays.csv")
        _write_csv(delays_path, ["alpha", "age_subframes", "count"],
                   [[alpha, age, count]
                    for alpha, counts in sorted(res.delay_counts.items())
                    for age, count in sorted(counts.items())])
        written = [path, delays_path]
        if args.trace:
            import json
            trace_path = out.register(args.out / "simulate_trace.ndjson")
            with open(trace_path, "w") as fh:
                for rec in res.trace:
                    fh.write(json.dumps(rec) + "\n")
            written.append(trace_path)
        if not args.no_figures:
            fig = out.register(args.out / "simulate_delays.png")
            figures.plot_delay_hist(res.delay_counts, fig, "CSI age by subframe")
            written.append(fig)
        print(f"throughput={res.throughput_bps/1e6:.3f} Mbps "
              f"kappa={res.kappa/1e6:.3f} Mbit/J "
              f"occupancy={res.wifi_occupancy:.4f}")
        for p in written:
            print(f"wrote {p}")
        return 0
    except BaseException:
        out.discard_all()
        raise


def _cmd_sweep(args, cfg: NetworkConfig) -> int:
    axes = tuple(_parse_axis(a) for a in args.axis)
    spec = ExperimentSpec(kind=args.kind, axes=axes, out_dir=args.out,
                          source=args.source, samples=args.samples,
                          bursts=args.bursts, jobs=args.jobs,
                          figures=not args.no_figures, d_th=args.d_th,
                          restarts=args.restarts, exhaustive=args.exhaustive)
    for path in run_experiment(spec, cfg):
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_scenario(args)
        if args.command == "fixed-point":
            return _cmd_fixed_point(args, cfg)
        if args.command == "pmf":
            return _cmd_pmf(args, cfg)
        if args.command == "throughput":
            return _one_point_command(args, cfg, "throughput")
        if args.command == "ee":
            return _one_point_command(args, cfg, "ee")
        if args.command == "optimize":
            return _cmd_optimize(args, cfg)
        if args.command == "simulate":
            return _cmd_simulate(args, cfg)
        if args.command == "sweep":
            return _cmd_sweep(args, cfg)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
