"""Command-line interface.

Subcommands: synth-road, optimize, mpc, traffic-gen, aging, compare.
Outputs are CSV/JSON/PNG files in --out-dir; everything emitted is
byte-deterministic for fixed seeds (wall-clock timings are reported on
stderr only, never written to files).  Exit codes: 0 success, 1 usage
error, 2 infeasible scenario, 3 solver non-convergence (outputs are
still written).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .aging import (
    AgingParams,
    DayConfig,
    RangeExceededError,
    daily_drive_from_route,
    drive_trace,
    project_life,
    simulate_day,
)
from .dynamics import DegenerateSegmentError, KinematicsError, VehicleParams
from .mpc import MpcConfig, run_route
from .objective import SpeedBounds
from .roads import (
    RoadFormatError,
    RoadProfile,
    load_road,
    max_abs_slope,
    ramp_road,
    save_road,
    synth_road,
)
from .mpc import RouteResult
from .objective import soc_parts_arrays
from .scenarios import (
    FingerprintMismatchError,
    InfeasibleScenarioError,
    ScenarioConfig,
    cc_baseline,
    compare,
    scenario_fingerprint,
)
from .solver import (
    NoFeasiblePointError,
    SolverConfig,
    brute_force_oracle,
    solve,
)
from .traffic import (
    HEAVY_TRAFFIC,
    LIGHT_TRAFFIC,
    NORMAL_TRAFFIC,
    CollisionError,
    TrafficConfig,
    generate_trace,
    save_trace,
)
from . import report


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


_TRAFFIC_PRESETS = {
    "none": None,
    "light": LIGHT_TRAFFIC,
    "normal": NORMAL_TRAFFIC,
    "heavy": HEAVY_TRAFFIC,
}


def _dataclass_from(cls, data: dict):
    names = {f.name for f in dataclass_fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    kwargs = {
        k: tuple(v) if isinstance(v, list) else v for k, v in data.items()
    }
    return cls(**kwargs)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    with p.open("rb") as fh:
        return tomllib.load(fh)


def _build(args) -> dict:
    """Materialise configuration objects from TOML plus CLI overrides."""
    conf = _load_config(args.config)
    vehicle = _dataclass_from(VehicleParams, conf.get("vehicle", {}))
    solver_cfg = _dataclass_from(SolverConfig, conf.get("solver", {}))
    mpc_cfg = _dataclass_from(MpcConfig, conf.get("mpc", {}))
    day_cfg = _dataclass_from(DayConfig, conf.get("day", {}))
    aging_params = _dataclass_from(AgingParams, conf.get("aging", {}))
    traffic = None
    preset = getattr(args, "traffic", "none")
    if "traffic" in conf:
        traffic = _dataclass_from(TrafficConfig, conf["traffic"])
    elif preset != "none":
        traffic = _TRAFFIC_PRESETS[preset]
    if traffic is not None:
        traffic = traffic.with_seed(args.seed)
    return {
        "vehicle": vehicle,
        "solver": solver_cfg,
        "mpc": mpc_cfg,
        "day": day_cfg,
        "aging": aging_params,
        "traffic": traffic,
    }


def _road_from_arg(spec: str, segment_m: float, seed: int) -> RoadProfile:
    """Road argument: a CSV path, or synth[:len_km:amp_m:wave_km],
    or ramp[:flat_km:grade_pct:grade_km:flat_km]."""
    if spec == "synth":
        return synth_road(20.0, 40.0, 4.0, seed=seed, segment_length=segment_m)
    if spec.startswith("synth:"):
        parts = spec.split(":")[1:]
        if len(parts) != 3:
            raise UsageError("expected synth:<length_km>:<amplitude_m>:<wavelength_km>")
        return synth_road(
            float(parts[0]), float(parts[1]), float(parts[2]),
            seed=seed, segment_length=segment_m,
        )
    if spec == "ramp":
        return ramp_road(1.5, -1.2, 2.5, 2.0, segment_length=segment_m)
    if spec.startswith("ramp:"):
        parts = spec.split(":")[1:]
        if len(parts) != 4:
            raise UsageError(
                "expected ramp:<flat_km>:<grade_pct>:<grade_km>:<flat_km>"
            )
        return ramp_road(
            float(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]),
            segment_length=segment_m,
        )
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"road file not found: {path}")
    return load_road(path, segment_length=segment_m)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args, built, road) -> ScenarioConfig:
    speed = None if args.tau_s is not None else args.speed_kmh
    return ScenarioConfig(
        road=road,
        vehicle=built["vehicle"],
        target_speed_kmh=speed,
        tau_s=args.tau_s,
        bounds_kmh=tuple(args.bounds_kmh),
        traffic=built["traffic"],
        seeds=tuple(args.seeds),
        mpc=built["mpc"],
        solver=built["solver"],
        initial_speed_kmh=getattr(args, "initial_speed_kmh", None),
        final_speed_kmh=getattr(args, "final_speed_kmh", None),
    )


def _stderr_timings(label: str, walls: list[float]) -> None:
    if not walls:
        return
    arr = np.array(walls)
    print(
        f"[timing] {label}: windows={arr.size} "
        f"median={np.median(arr):.4f}s max={arr.max():.4f}s "
        "(stderr only; never written to output files)",
        file=sys.stderr,
    )


def cmd_synth_road(args) -> int:
    out = _out_dir(args)
    road = synth_road(
        args.length_km, args.amplitude_m, args.wavelength_km,
        seed=args.seed, segment_length=args.segment_m,
    )
    save_road(road, out / "road.csv")
    report.fig_road(out / "road.png", road)
    print(
        f"wrote {out / 'road.csv'} ({road.n_segments} segments, "
        f"max grade {100.0 * np.tan(max_abs_slope(road)):.2f}%)"
    )
    return 0


def cmd_traffic_gen(args) -> int:
    out = _out_dir(args)
    cfg = TrafficConfig(
        mean_with_km=args.mu1_km, mean_without_km=args.mu2_km, seed=args.seed
    )
    trace = generate_trace(args.length_km * 1000.0, cfg, args.segment_m)
    save_trace(trace, out / "trace.csv")
    n_ep = len(trace.episodes)
    n_on = int(np.sum(trace.present))
    print(
        f"wrote {out / 'trace.csv'}: {n_ep} episodes, "
        f"{n_on}/{trace.n_segments} segments occupied"
    )
    return 0


def cmd_optimize(args) -> int:
    built = _build(args)
    road = _road_from_arg(args.road, args.segment_m, args.seed)
    scenario = _scenario(args, built, road)
    out = _out_dir(args)
    legal = scenario.legal_bounds()
    result = solve(built["vehicle"], road, scenario.tau, legal, built["solver"])
    summary = {
        "fingerprint": scenario_fingerprint(scenario),
        "road": road.name,
        "tau_s": scenario.tau,
        "energy_soc": result.energy,
        "converged": result.converged,
        "iterations": result.iterations,
        "time_residual_s": result.time_residual,
        "cons_residual_norm": result.cons_residual_norm,
        "x_mps": [float(v) for v in result.traj.x],
    }
    if args.oracle:
        oracle = brute_force_oracle(
            built["vehicle"], road, scenario.tau, legal,
            grid_step=args.grid_step, time_tol=args.time_tol,
        )
        gap_pct = 100.0 * (result.energy - oracle.energy) / abs(oracle.energy)
        summary["oracle"] = {
            "energy_soc": oracle.energy,
            "trip_time_s": oracle.trip_time,
            "gap_pct": gap_pct,
        }
        print(
            f"solver energy {result.energy:.6e}  "
            f"oracle energy {oracle.energy:.6e}  gap {gap_pct:+.3f}%"
        )
    # package the solve as a route-style record for shared report paths
    dis, chg = soc_parts_arrays(built["vehicle"], road, result.traj.x)
    pair = np.maximum(result.traj.x[:-1] + result.traj.x[1:], 1e-9)
    t_phys = 2.0 * road.segment_length / pair
    dsoc = dis - chg
    route = RouteResult(
        x=result.traj.x, t=t_phys, soc_delta=dsoc, discharge=dis, charge=chg,
        soc_trace=1.0 - np.concatenate([[0.0], np.cumsum(dsoc)]),
        trip_time=float(np.sum(t_phys)), energy=float(np.sum(dsoc)),
        headways=np.full(road.n_segments, np.nan), min_headway=float("inf"),
        label="optimize",
    )
    report.write_trajectory_csv(out / "trajectory.csv", route)
    report.write_json(out / "summary.json", summary)
    report.fig_speed_profile(out / "speed_profile.png", road, {"optimize": route})
    report.fig_soc_profile(out / "soc_profile.png", road, {"optimize": route})
    print(f"wrote trajectory.csv, summary.json and figures to {out}")
    return 0 if result.converged else 3


def cmd_mpc(args) -> int:
    built = _build(args)
    road = _road_from_arg(args.road, args.segment_m, args.seed)
    scenario = _scenario(args, built, road)
    out = _out_dir(args)
    legal = scenario.legal_bounds()
    trace = None
    if built["traffic"] is not None:
        trace = generate_trace(road.total_length, built["traffic"], road.segment_length)
        save_trace(trace, out / "trace.csv")
    v0 = (
        scenario.initial_speed_kmh / 3.6
        if scenario.initial_speed_kmh is not None
        else None
    )
    route = run_route(
        built["vehicle"], road, scenario.tau, legal, built["mpc"], built["solver"],
        trace=trace, initial_speed=v0, label="admm_mpc",
    )
    _stderr_timings("mpc", route.window_wall_times)
    summary = {
        "fingerprint": scenario_fingerprint(scenario),
        "road": road.name,
        "tau_s": scenario.tau,
        "route": report.route_summary(route, built["vehicle"]),
    }
    report.write_trajectory_csv(out / "trajectory.csv", route)
    report.write_json(out / "summary.json", summary)
    report.write_series_csv(out / "series.csv", road, {"admm_mpc": route})
    report.fig_speed_profile(out / "speed_profile.png", road, {"admm_mpc": route})
    report.fig_soc_profile(out / "soc_profile.png", road, {"admm_mpc": route})
    aging_out = _aging_projection(args, built, road, route)
    report.write_json(out / "aging.json", aging_out)
    print(f"wrote trajectory.csv, summary.json, aging.json and figures to {out}")
    return 0 if not route.fallback_windows else 3


def _aging_projection(args, built, road, route, cc_route=None) -> dict:
    params = built["vehicle"]
    day_cfg: DayConfig = built["day"]
    route_km = road.total_length / 1000.0
    daily_km = getattr(args, "daily_km", None)
    if daily_km is None:
        # default duty: as many route repetitions as ~85% DOD allows
        net = float(np.sum(route.soc_delta))
        if net > 0:
            usable = int((0.85 * (1.0 - day_cfg.soc_end_target)) / net)
        else:
            usable = 1  # net-regenerative route: one pass a day
        daily_km = min(max(usable, 1), 200) * route_km
    projections = {}
    for r in filter(None, [route, cc_route]):
        drive = daily_drive_from_route(r, params.c_ah, route_km, daily_km)
        projections[r.label] = project_life(
            drive, built["aging"], day_cfg, params.c_ah
        )
    payload = report.aging_summary(projections)
    payload["daily_km"] = daily_km
    return payload


def cmd_aging(args) -> int:
    built = _build(args)
    road = _road_from_arg(args.road, args.segment_m, args.seed)
    scenario = _scenario(args, built, road)
    out = _out_dir(args)
    legal = scenario.legal_bounds()
    mpc_route = run_route(
        built["vehicle"], road, scenario.tau, legal, built["mpc"], built["solver"],
        label="admm_mpc",
    )
    _stderr_timings("aging/mpc", mpc_route.window_wall_times)
    cc_route = cc_baseline(built["vehicle"], road, legal, tau=scenario.tau)
    params = built["vehicle"]
    day_cfg: DayConfig = built["day"]
    route_km = road.total_length / 1000.0
    daily_km = args.daily_km
    projections = {}
    for r in (mpc_route, cc_route):
        drive = daily_drive_from_route(r, params.c_ah, route_km, daily_km)
        proj = project_life(drive, built["aging"], day_cfg, params.c_ah)
        projections[r.label] = proj
        capacity = params.c_ah
        soc_start = day_cfg.soc_end_target + drive.net_ah / capacity
        day1 = drive_trace(drive, capacity, soc_start)
        simulate_day(day1, day_cfg, capacity)  # validates the schedule
        report.write_soc_trace_csv(out / f"day_trace_{r.label}.csv", day1)
    payload = report.aging_summary(projections)
    payload["daily_km"] = daily_km
    payload["fingerprint"] = scenario_fingerprint(scenario)
    report.write_json(out / "aging.json", payload)
    report.fig_aging_curves(out / "aging_curves.png", projections)
    for label, proj in sorted(projections.items()):
        print(
            f"{label}: life {proj.life_years:.2f} years ({proj.reason}), "
            f"day-1 throughput {proj.day1_throughput_ah:.1f} Ah, "
            f"DOD {100.0 * proj.day1_dod:.2f}%"
        )
    return 0


def cmd_compare(args) -> int:
    if args.results:
        return _compare_results_dirs(args)
    built = _build(args)
    road = _road_from_arg(args.road, args.segment_m, args.seed)
    scenario = _scenario(args, built, road)
    out = _out_dir(args)
    rep = compare(scenario)
    for label, route in rep.results.items():
        _stderr_timings(f"compare/{label}", route.window_wall_times)
        report.write_trajectory_csv(out / f"trajectory_{label}.csv", route)
    report.write_json(
        out / "summary.json", report.comparison_summary(rep, built["vehicle"])
    )
    report.write_series_csv(out / "series.csv", road, rep.results)
    report.fig_speed_profile(out / "speed_profile.png", road, rep.results)
    report.fig_soc_profile(out / "soc_profile.png", road, rep.results)
    if rep.traffic:
        report.fig_traffic_deltas(out / "traffic_deltas.png", rep)
    print(
        f"energy delta (admm_mpc vs cc): {rep.energy_delta_mean_pct:+.3f}% "
        f"(3σ band {rep.energy_delta_band_pct[0]:+.3f}% .. "
        f"{rep.energy_delta_band_pct[1]:+.3f}%)"
    )
    return 0


def _compare_results_dirs(args) -> int:
    import json as _json

    summaries = []
    for d in args.results:
        path = Path(d) / "summary.json"
        if not path.exists():
            raise UsageError(f"no summary.json under {d}")
        summaries.append(_json.loads(path.read_text()))
    fps = [s.get("fingerprint") for s in summaries]
    if len(set(fps)) != 1 or fps[0] is None:
        raise FingerprintMismatchError(
            "refusing to compare: scenario fingerprints differ "
            f"({', '.join(str(f)[:12] for f in fps)})"
        )
    routes = [s.get("route", s) for s in summaries]
    energies = [r.get("energy_soc") for r in routes]
    if any(e is None for e in energies):
        raise UsageError("summaries lack energy_soc; run `mpc` or `optimize` first")
    base = energies[-1]
    out = _out_dir(args)
    payload = {
        "fingerprint": fps[0],
        "sources": [str(Path(d)) for d in args.results],
        "energies_soc": energies,
        "delta_pct_vs_last": [100.0 * (e - base) / abs(base) for e in energies],
    }
    report.write_json(out / "comparison.json", payload)
    print(f"wrote {out / 'comparison.json'}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ecotruck", description=__doc__)
    parser.add_argument("--config", default=None, help="TOML config overriding defaults")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="ecotruck_out")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, road=True):
        if road:
            p.add_argument(
                "--road", default="synth",
                help="road CSV path, 'synth[:len:amp:wave]' or 'ramp[:..]'",
            )
        p.add_argument("--segment-m", type=float, default=50.0)
        p.add_argument("--speed-kmh", type=float, default=85.0,
                       help="sets the trip-time target via length/speed")
        p.add_argument("--tau-s", type=float, default=None)
        p.add_argument("--bounds-kmh", type=float, nargs=2, default=[75.0, 90.0])
        p.add_argument("--traffic", choices=list(_TRAFFIC_PRESETS), default="none")
        p.add_argument("--seeds", type=_int_list, default=[0])
        p.add_argument("--initial-speed-kmh", type=float, default=None)
        p.add_argument("--final-speed-kmh", type=float, default=None)

    p = sub.add_parser("synth-road", help="generate a synthetic road CSV + figure")
    p.add_argument("--length-km", type=float, default=20.0)
    p.add_argument("--amplitude-m", type=float, default=40.0)
    p.add_argument("--wavelength-km", type=float, default=4.0)
    p.add_argument("--segment-m", type=float, default=50.0)
    p.set_defaults(func=cmd_synth_road)

    p = sub.add_parser("traffic-gen", help="generate a traffic trace CSV")
    p.add_argument("--length-km", type=float, default=20.0)
    p.add_argument("--mu1-km", type=float, default=3.0)
    p.add_argument("--mu2-km", type=float, default=3.0)
    p.add_argument("--segment-m", type=float, default=50.0)
    p.set_defaults(func=cmd_traffic_gen)

    p = sub.add_parser("optimize", help="single-horizon trajectory solve")
    common(p)
    p.add_argument("--oracle", action="store_true",
                   help="also run the exhaustive grid oracle (few segments only)")
    p.add_argument("--grid-step", type=float, default=0.25)
    p.add_argument("--time-tol", type=float, default=0.5)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("mpc", help="receding-horizon run over a full route")
    common(p)
    p.add_argument("--daily-km", type=float, default=None,
                   help="daily distance for the aging projection")
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("aging", help="life projection for both controllers")
    common(p)
    p.add_argument("--daily-km", type=float, default=800.0)
    p.set_defaults(func=cmd_aging)

    p = sub.add_parser("compare", help="optimiser vs cruise control")
    common(p)
    p.add_argument("--results", nargs=2, default=None, metavar="DIR",
                   help="compare two existing result directories instead")
    p.set_defaults(func=cmd_compare)
    return parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list: {text!r}")


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (UsageError, FingerprintMismatchError, RoadFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        InfeasibleScenarioError,
        RangeExceededError,
        NoFeasiblePointError,
        CollisionError,
        KinematicsError,
        DegenerateSegmentError,
    ) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
