"""Scenario definitions, the cruise-control baseline, and comparisons.

A scenario fixes everything two controllers must share to be comparable:
road, vehicle, trip-time target, speed limits, traffic seeds.  Reports
carry a fingerprint hashed over exactly those shared inputs so results
from different scenarios refuse to be merged.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import VehicleParams
from .mpc import MpcConfig, RouteResult, run_route
from .objective import SpeedBounds, soc_parts_arrays
from .roads import RoadProfile
from .solver import SolverConfig
from .traffic import (
    TrafficConfig,
    TrafficTrace,
    generate_trace,
    headway_speed_bound,
    update_gap,
)


class InfeasibleScenarioError(RuntimeError):
    """Scenario cannot be run as specified (speed outside bounds, etc.)."""


class FingerprintMismatchError(RuntimeError):
    """Results from different scenarios were asked to be compared."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Shared inputs of one controller comparison."""

    road: RoadProfile
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    target_speed_kmh: float | None = 85.0   # sets tau = length / speed
    tau_s: float | None = None
    bounds_kmh: tuple[float, float] = (75.0, 90.0)
    traffic: TrafficConfig | None = None
    seeds: tuple[int, ...] = (0,)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_speed_kmh: float | None = None  # None: first boundary free
    final_speed_kmh: float | None = None    # None: last boundary free

    def __post_init__(self) -> None:
        if (self.target_speed_kmh is None) == (self.tau_s is None):
            raise ValueError("specify exactly one of target speed or trip time")
        if self.bounds_kmh[0] < 0 or self.bounds_kmh[1] < self.bounds_kmh[0]:
            raise ValueError("bad speed bounds")
        for pin in (self.initial_speed_kmh, self.final_speed_kmh):
            if pin is not None and not (
                self.bounds_kmh[0] <= pin <= self.bounds_kmh[1]
            ):
                raise ValueError("pinned end speed outside the legal bounds")
        if not self.seeds:
            raise ValueError("at least one seed required")

    @property
    def tau(self) -> float:
        if self.tau_s is not None:
            return self.tau_s
        return self.road.total_length / (self.target_speed_kmh / 3.6)

    def legal_bounds(self) -> SpeedBounds:
        lo, hi = (v / 3.6 for v in self.bounds_kmh)
        bounds = SpeedBounds.uniform(self.road.n_segments + 1, lo, hi)
        if self.final_speed_kmh is not None:
            # pinning the exit keeps kinetic energy at the route ends equal
            # across controllers, so energy deltas are purely operational
            bounds = bounds.pinned(-1, self.final_speed_kmh / 3.6)
        return bounds


def scenario_fingerprint(cfg: ScenarioConfig) -> str:
    """Hash of every input both controllers must share."""
    payload = {
        "road": {
            "segment_length": cfg.road.segment_length,
            "altitudes": [float(a) for a in cfg.road.altitudes],
        },
        "vehicle": asdict(cfg.vehicle),
        "target_speed_kmh": cfg.target_speed_kmh,
        "tau_s": cfg.tau_s,
        "bounds_kmh": list(cfg.bounds_kmh),
        "traffic": asdict(cfg.traffic) if cfg.traffic else None,
        "seeds": list(cfg.seeds),
        "mpc": asdict(cfg.mpc),
        "solver": asdict(cfg.solver),
        "initial_speed_kmh": cfg.initial_speed_kmh,
        "final_speed_kmh": cfg.final_speed_kmh,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def cc_baseline(
    params: VehicleParams,
    road: RoadProfile,
    legal: SpeedBounds,
    speed: float | None = None,
    tau: float | None = None,
    trace: TrafficTrace | None = None,
    initial_soc: float = 1.0,
    label: str = "cc",
) -> RouteResult:
    """Uniform-speed baseline; drops to the headway bound under traffic.

    Exactly one of ``speed`` (m/s) or ``tau`` must be given; with ``tau``
    and no traffic the speed is length/tau, with traffic it is found by
    bisection so the capped trip time matches ``tau``.  The set speed
    must respect the legal bounds everywhere.
    """
    if (speed is None) == (tau is None):
        raise ValueError("specify exactly one of speed or tau")
    if speed is None:
        if trace is None:
            speed = road.total_length / tau
        else:
            speed = _cc_speed_for_time(params, road, legal, tau, trace)
    if np.any(speed > legal.upper + 1e-9) or np.any(speed < legal.lower - 1e-9):
        raise InfeasibleScenarioError(
            f"constant speed {speed:.3f} m/s violates the legal bounds"
        )
    return _cc_run(params, road, float(speed), trace, initial_soc, label)


def _cc_run(
    params: VehicleParams,
    road: RoadProfile,
    speed: float,
    trace: TrafficTrace | None,
    initial_soc: float,
    label: str,
) -> RouteResult:
    n = road.n_segments
    length = road.segment_length
    x = np.empty(n + 1)
    x[0] = speed
    headways = np.full(n, np.nan)
    gap: float | None = None
    h = trace.headway_s if trace is not None else 0.0
    for i in range(n):
        if trace is not None and trace.present[i]:
            if gap is None:
                gap = float(trace.init_gap[i])
            bound = headway_speed_bound(
                float(x[i]), gap, float(trace.lead_speed[i]), length, h
            )
            x[i + 1] = min(speed, bound)
            pair = max(float(x[i] + x[i + 1]), 1e-9)
            t_seg = 2.0 * length / pair
            gap = update_gap(gap, float(trace.lead_speed[i]), t_seg, length)
            headways[i] = gap / x[i + 1] if x[i + 1] > 0 else math.inf
        else:
            gap = None
            x[i + 1] = speed
    dis, chg = soc_parts_arrays(params, road, x)
    pair = np.maximum(x[:-1] + x[1:], 1e-9)
    t = 2.0 * length / pair
    dsoc = dis - chg
    finite = headways[np.isfinite(headways)]
    return RouteResult(
        x=x,
        t=t,
        soc_delta=dsoc,
        discharge=dis,
        charge=chg,
        soc_trace=initial_soc - np.concatenate([[0.0], np.cumsum(dsoc)]),
        trip_time=float(np.sum(t)),
        energy=float(np.sum(dsoc)),
        headways=headways,
        min_headway=float(np.min(finite)) if finite.size else math.inf,
        label=label,
    )


def _cc_speed_for_time(
    params: VehicleParams,
    road: RoadProfile,
    legal: SpeedBounds,
    tau: float,
    trace: TrafficTrace,
) -> float:
    """Set speed whose capped trip time matches tau (trip time is
    monotone nonincreasing in the set speed, so bisection applies)."""

    lo = float(np.max(legal.lower))
    hi = float(np.min(legal.upper))

    def trip(v: float) -> float:
        return _cc_run(params, road, v, trace, 1.0, "probe").trip_time

    if trip(hi) > tau:
        return hi  # even flat-out too slow under this traffic; get closest
    if lo > 0 and trip(lo) < tau:
        return lo
    lo_v, hi_v = max(lo, 1e-3), hi
    for _ in range(80):
        mid = 0.5 * (lo_v + hi_v)
        if trip(mid) > tau:
            lo_v = mid
        else:
            hi_v = mid
    return hi_v


@dataclass
class ControllerMetrics:
    """Deterministic per-controller summary numbers."""

    label: str
    energy_soc: float
    energy_kwh: float
    trip_time_s: float
    throughput_ah: float
    min_headway_s: float
    median_iterations: float | None = None
    max_iterations: int | None = None
    fallback_count: int | None = None


def metrics_from_route(route: RouteResult, params: VehicleParams) -> ControllerMetrics:
    iters = route.window_iterations
    return ControllerMetrics(
        label=route.label,
        energy_soc=route.energy,
        energy_kwh=route.energy * params.u_volt * params.c_ah * params.n_packs / 1000.0,
        trip_time_s=route.trip_time,
        throughput_ah=route.throughput * params.c_ah,
        min_headway_s=route.min_headway,
        median_iterations=float(np.median(iters)) if iters else None,
        max_iterations=max(iters) if iters else None,
        fallback_count=len(route.fallback_windows) if iters else None,
    )


@dataclass
class SeedOutcome:
    seed: int
    energy_delta_pct: float          # (mpc - cc) / cc * 100
    time_delta_pct: float
    mpc_min_headway_s: float
    cc_min_headway_s: float


@dataclass
class ComparisonReport:
    """Controller comparison over one scenario (possibly many seeds)."""

    fingerprint: str
    road_name: str
    n_segments: int
    tau_s: float
    traffic: bool
    controllers: dict
    energy_delta_pct: float
    time_delta_pct: float
    seed_outcomes: list
    energy_delta_mean_pct: float
    energy_delta_sigma_pct: float
    energy_delta_band_pct: tuple[float, float]   # mean +/- 3 sigma
    results: dict                                 # label -> representative RouteResult
    trace: TrafficTrace | None = None


def compare(cfg: ScenarioConfig) -> ComparisonReport:
    """Run the optimising controller and the CC baseline on equal terms.

    Without traffic this is one deterministic run per controller at the
    shared trip time.  With traffic, every seed gets its own trace; CC's
    set speed is re-matched to the optimiser's realised trip time per
    seed, and energy deltas are aggregated into mean and 3-sigma band.
    """
    params = cfg.vehicle
    road = cfg.road
    legal = cfg.legal_bounds()
    tau = cfg.tau
    v0 = cfg.initial_speed_kmh / 3.6 if cfg.initial_speed_kmh is not None else None
    outcomes: list[SeedOutcome] = []
    rep_results: dict[str, RouteResult] = {}
    rep_trace: TrafficTrace | None = None
    if cfg.traffic is None:
        mpc_run = run_route(
            params, road, tau, legal, cfg.mpc, cfg.solver,
            initial_speed=v0, label="admm_mpc",
        )
        cc_run = cc_baseline(params, road, legal, tau=tau)
        outcomes.append(_outcome(0, mpc_run, cc_run))
        rep_results = {"admm_mpc": mpc_run, "cc": cc_run}
    else:
        for seed in cfg.seeds:
            trace = generate_trace(
                road.total_length, cfg.traffic.with_seed(seed), road.segment_length
            )
            mpc_run = run_route(
                params, road, tau, legal, cfg.mpc, cfg.solver,
                trace=trace, initial_speed=v0, label="admm_mpc",
            )
            cc_run = cc_baseline(
                params, road, legal, tau=mpc_run.trip_time, trace=trace
            )
            outcomes.append(_outcome(seed, mpc_run, cc_run))
            if not rep_results:
                rep_results = {"admm_mpc": mpc_run, "cc": cc_run}
                rep_trace = trace
    deltas = np.array([o.energy_delta_pct for o in outcomes])
    mean = float(np.mean(deltas))
    sigma = float(np.std(deltas))
    mpc_rep, cc_rep = rep_results["admm_mpc"], rep_results["cc"]
    return ComparisonReport(
        fingerprint=scenario_fingerprint(cfg),
        road_name=road.name,
        n_segments=road.n_segments,
        tau_s=tau,
        traffic=cfg.traffic is not None,
        controllers={
            "admm_mpc": metrics_from_route(mpc_rep, params),
            "cc": metrics_from_route(cc_rep, params),
        },
        energy_delta_pct=float(outcomes[0].energy_delta_pct),
        time_delta_pct=float(outcomes[0].time_delta_pct),
        seed_outcomes=outcomes,
        energy_delta_mean_pct=mean,
        energy_delta_sigma_pct=sigma,
        energy_delta_band_pct=(mean - 3.0 * sigma, mean + 3.0 * sigma),
        results=rep_results,
        trace=rep_trace,
    )


def _outcome(seed: int, mpc_run: RouteResult, cc_run: RouteResult) -> SeedOutcome:
    return SeedOutcome(
        seed=seed,
        energy_delta_pct=100.0 * (mpc_run.energy - cc_run.energy) / cc_run.energy,
        time_delta_pct=100.0 * (mpc_run.trip_time - cc_run.trip_time) / cc_run.trip_time,
        mpc_min_headway_s=mpc_run.min_headway,
        cc_min_headway_s=cc_run.min_headway,
    )
