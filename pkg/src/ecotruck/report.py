"""Report emission: delimited outputs, JSON summaries, and figures.

Everything written here is byte-deterministic for fixed inputs: floats
are serialised via ``repr`` (shortest round-trip), JSON keys are sorted,
and PNGs are rendered on the Agg backend with pinned metadata.  Wall
clock measurements are quarantined in a separate timings file so the
deterministic outputs stay comparable across runs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .aging import LifeProjection, SocTrace
from .mpc import RouteResult
from .roads import RoadProfile
from .scenarios import ComparisonReport

TRAJECTORY_HEADER = ("segment_index", "x_mps", "t_s", "soc_delta")
SOC_TRACE_HEADER = ("q_ah", "soc")
_PNG_METADATA = {"Software": "ecotruck"}
_FIG_KW = {"dpi": 120}


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, float) and obj != obj:  # NaN -> null for valid JSON
        return None
    return obj


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(_jsonify(payload), sort_keys=True, indent=2) + "\n"
    )
    return path


def _write_csv(path: str | Path, header: tuple, rows) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
        )
    path.write_text(buf.getvalue())
    return path


def write_trajectory_csv(path: str | Path, route: RouteResult) -> Path:
    """Per-segment executed trajectory; x_mps is the segment's exit speed
    (the entry speed of the first segment is in the summary)."""
    rows = (
        (i, float(route.x[i + 1]), float(route.t[i]), float(route.soc_delta[i]))
        for i in range(route.t.size)
    )
    return _write_csv(path, TRAJECTORY_HEADER, rows)


def write_soc_trace_csv(path: str | Path, trace: SocTrace) -> Path:
    rows = zip((float(q) for q in trace.q), (float(s) for s in trace.soc))
    return _write_csv(path, SOC_TRACE_HEADER, rows)


def load_soc_trace_csv(path: str | Path) -> SocTrace:
    q, soc = [], []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SOC_TRACE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SOC_TRACE_HEADER)}")
        for row in reader:
            if not row:
                continue
            q.append(float(row[0]))
            soc.append(float(row[1]))
    return SocTrace(np.array(q), np.array(soc))


def write_series_csv(
    path: str | Path, road: RoadProfile, results: dict[str, RouteResult]
) -> Path:
    """Plot-ready per-boundary series: position, altitude, and per
    controller the boundary speed and SOC."""
    labels = sorted(results)
    header = ["position_m", "altitude_m"]
    for label in labels:
        header += [f"speed_mps_{label}", f"soc_{label}"]
    dist = road.distances
    rows = []
    for i in range(dist.size):
        row = [float(dist[i]), float(road.altitudes[i])]
        for label in labels:
            r = results[label]
            row += [float(r.x[i]), float(r.soc_trace[i])]
        rows.append(row)
    return _write_csv(path, tuple(header), rows)


def route_summary(route: RouteResult, params) -> dict:
    """Deterministic facts about one executed route (no wall times)."""
    return {
        "label": route.label,
        "energy_soc": route.energy,
        "energy_kwh": route.energy * params.u_volt * params.c_ah * params.n_packs / 1000.0,
        "trip_time_s": route.trip_time,
        "throughput_ah": route.throughput * params.c_ah,
        "initial_speed_mps": float(route.x[0]),
        "final_speed_mps": float(route.x[-1]),
        "min_headway_s": None if route.min_headway == float("inf") else route.min_headway,
        "segments": int(route.t.size),
        "window_iterations": list(route.window_iterations),
        "windows_converged": int(sum(route.window_converged)),
        "windows_total": len(route.window_converged),
        "fallback_windows": list(route.fallback_windows),
        "retightened_windows": list(route.retightened_windows),
        "final_soc": float(route.soc_trace[-1]),
    }


def comparison_summary(report: ComparisonReport, params) -> dict:
    return {
        "fingerprint": report.fingerprint,
        "road": report.road_name,
        "n_segments": report.n_segments,
        "tau_s": report.tau_s,
        "traffic": report.traffic,
        "controllers": {
            label: asdict(m) for label, m in report.controllers.items()
        },
        "energy_delta_pct": report.energy_delta_pct,
        "time_delta_pct": report.time_delta_pct,
        "energy_delta_mean_pct": report.energy_delta_mean_pct,
        "energy_delta_sigma_pct": report.energy_delta_sigma_pct,
        "energy_delta_band_pct": list(report.energy_delta_band_pct),
        "seeds": [
            {
                "seed": o.seed,
                "energy_delta_pct": o.energy_delta_pct,
                "time_delta_pct": o.time_delta_pct,
                "mpc_min_headway_s": _finite_or_none(o.mpc_min_headway_s),
                "cc_min_headway_s": _finite_or_none(o.cc_min_headway_s),
            }
            for o in report.seed_outcomes
        ],
    }


def _finite_or_none(v: float):
    return v if v == v and abs(v) != float("inf") else None


def aging_summary(projections: dict[str, LifeProjection]) -> dict:
    out = {}
    for label, proj in sorted(projections.items()):
        out[label] = {
            "life_years": proj.life_years,
            "days": proj.days,
            "reason": proj.reason,
            "fade_curve": [float(v) for v in proj.fade_curve],
            "range_curve": [float(v) for v in proj.range_curve],
            "day1": None
            if proj.day1_stats is None
            else {
                "soc_avg": proj.day1_stats.soc_avg,
                "soc_dev": proj.day1_stats.soc_dev,
                "throughput_ah": proj.day1_throughput_ah,
                "dod": proj.day1_dod,
            },
            "final_capacity_ah": proj.final_state.capacity_now,
        }
    return out


_STYLE = {"admm_mpc": dict(color="#1f6fb4"), "cc": dict(color="#c03b28", linestyle="--")}


def _style(label: str) -> dict:
    return _STYLE.get(label, {})


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_PNG_METADATA, **_FIG_KW)
    plt.close(fig)
    return path


def fig_speed_profile(
    path: str | Path, road: RoadProfile, results: dict[str, RouteResult]
) -> Path:
    """Boundary speeds along the route, altitude shadowed behind."""
    fig, ax = plt.subplots(figsize=(9, 4))
    km = road.distances / 1000.0
    for label in sorted(results):
        ax.plot(km, results[label].x * 3.6, label=label, **_style(label))
    ax.set_xlabel("position [km]")
    ax.set_ylabel("speed [km/h]")
    alt_ax = ax.twinx()
    alt_ax.fill_between(km, road.altitudes, color="0.85", zorder=0)
    alt_ax.set_ylabel("altitude [m]", color="0.5")
    alt_ax.tick_params(axis="y", colors="0.5")
    ax.set_zorder(alt_ax.get_zorder() + 1)
    ax.patch.set_visible(False)
    ax.legend(loc="lower left")
    fig.tight_layout()
    return _save(fig, path)


def fig_soc_profile(
    path: str | Path, road: RoadProfile, results: dict[str, RouteResult]
) -> Path:
    fig, ax = plt.subplots(figsize=(9, 4))
    km = road.distances / 1000.0
    for label in sorted(results):
        ax.plot(km, results[label].soc_trace, label=label, **_style(label))
    ax.set_xlabel("position [km]")
    ax.set_ylabel("SOC [-]")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)


def fig_aging_curves(path: str | Path, projections: dict[str, LifeProjection]) -> Path:
    fig, (ax_fade, ax_range) = plt.subplots(1, 2, figsize=(10, 4))
    for label in sorted(projections):
        proj = projections[label]
        years = (np.arange(proj.fade_curve.size) + 1) / 260.0
        ax_fade.plot(years, 100.0 * proj.fade_curve, label=label, **_style(label))
        ax_range.plot(years, proj.range_curve, label=label, **_style(label))
    ax_fade.axhline(30.0, color="0.4", linewidth=0.8)
    ax_fade.set_xlabel("years")
    ax_fade.set_ylabel("capacity fade [%]")
    ax_range.set_xlabel("years")
    ax_range.set_ylabel("full-pack range [km]")
    ax_fade.legend()
    fig.tight_layout()
    return _save(fig, path)


def fig_traffic_deltas(path: str | Path, report: ComparisonReport) -> Path:
    """Per-seed energy deltas with the mean +/- 3 sigma band."""
    fig, ax = plt.subplots(figsize=(7, 4))
    seeds = [o.seed for o in report.seed_outcomes]
    deltas = [o.energy_delta_pct for o in report.seed_outcomes]
    ax.scatter(range(len(seeds)), deltas, color="#1f6fb4", zorder=3, label="per seed")
    mean = report.energy_delta_mean_pct
    lo, hi = report.energy_delta_band_pct
    ax.axhline(mean, color="#c03b28", label="mean")
    ax.axhspan(lo, hi, color="#c03b28", alpha=0.12, label="mean ± 3σ")
    ax.set_xticks(range(len(seeds)), [str(s) for s in seeds])
    ax.set_xlabel("traffic seed")
    ax.set_ylabel("energy delta vs CC [%]")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def fig_road(path: str | Path, road: RoadProfile) -> Path:
    fig, (ax_alt, ax_slope) = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    km = road.distances / 1000.0
    ax_alt.plot(km, road.altitudes, color="#1f6fb4")
    ax_alt.set_ylabel("altitude [m]")
    mid = (km[:-1] + km[1:]) / 2.0
    ax_slope.plot(mid, 100.0 * np.tan(road.slopes), color="#c03b28")
    ax_slope.set_ylabel("grade [%]")
    ax_slope.set_xlabel("position [km]")
    fig.tight_layout()
    return _save(fig, path)
