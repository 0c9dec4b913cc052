"""Receding-horizon execution of the trajectory optimiser over a route.

Only a fixed-length window of upcoming segments is optimised at a time.
The window gets a trip-time budget proportional to its share of the
remaining distance, the first boundary speed is pinned to the truck's
actual speed, and after executing the leading segment(s) the solution is
shifted forward as the next warm start.  Traffic enters purely through
per-window speed upper bounds; executed segments therefore satisfy the
headway constraint exactly, because the entry speed and gap are known
when the bound is computed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import VehicleParams
from .objective import SpeedBounds, Trajectory, soc_parts_arrays
from .roads import RoadProfile
from .solver import SolveResult, SolverConfig, default_start, solve
from .traffic import TrafficTrace, bounds_for_window, check_headways, update_gap


@dataclass(frozen=True)
class MpcConfig:
    """Receding-horizon settings.

    ``max_window_iters`` is the real-time budget: a cap on solver
    iterations for any single window, regardless of the solver's own
    ``max_outer``.  A window that exhausts it is executed from the best
    iterate found so far and flagged in ``fallback_windows``; planning
    must turn around before the truck reaches the next segment, and a
    marginally better plan delivered late is worth nothing.  ``None``
    leaves the solver limit alone.
    """

    horizon_segments: int = 30
    replan_every: int = 1      # segments executed per solve when replanning
    max_window_iters: int | None = 180

    def __post_init__(self) -> None:
        if self.horizon_segments < 1 or self.replan_every < 1:
            raise ValueError("horizon and replan stride must be positive")
        if self.max_window_iters is not None and self.max_window_iters < 1:
            raise ValueError("per-window iteration budget must be positive")


@dataclass
class RouteState:
    """Truck state between planning windows."""

    position_index: int
    speed_now: float
    elapsed_time: float
    soc_now: float
    gap_now: float | None
    warm_x: np.ndarray
    warm_t: np.ndarray


@dataclass
class RouteResult:
    """Executed route: per-segment speeds, times, SOC and diagnostics."""

    x: np.ndarray                   # executed boundary speeds, N+1
    t: np.ndarray                   # physical per-segment times, N
    soc_delta: np.ndarray           # per-pack SOC drawn per segment
    discharge: np.ndarray           # non-negative discharge part per segment
    charge: np.ndarray              # non-negative regeneration part per segment
    soc_trace: np.ndarray           # SOC at boundaries, N+1
    trip_time: float
    energy: float                   # total per-pack SOC spent
    headways: np.ndarray            # time headway after each segment, NaN if free
    min_headway: float
    window_iterations: list[int] = field(default_factory=list)
    window_converged: list[bool] = field(default_factory=list)
    window_wall_times: list[float] = field(default_factory=list)
    fallback_windows: list[int] = field(default_factory=list)
    retightened_windows: list[int] = field(default_factory=list)
    label: str = "mpc"

    @property
    def throughput(self) -> float:
        """Per-pack SOC fractions cycled through the pack while driving."""
        return float(np.sum(self.discharge + self.charge))


def window_time_budget(
    tau_total: float,
    elapsed: float,
    position_index: int,
    n_total: int,
    n_window: int,
    segment_length: float,
) -> float:
    """Time granted to the next window: remaining budget, distance-weighted."""
    remaining_segments = n_total - position_index
    if remaining_segments <= 0:
        raise ValueError("route already finished")
    if not 0 < n_window <= remaining_segments:
        raise ValueError("window must cover 1..remaining segments")
    remaining_time = tau_total - elapsed
    return remaining_time * (n_window / remaining_segments)


def _min_window_time(upper: np.ndarray, segment_length: float) -> float:
    s = upper[:-1] + upper[1:]
    if np.any(s <= 0):
        return math.inf
    return float(np.sum(2.0 * segment_length / s))


def _shift_warm(
    sol: Trajectory, n_exec: int, n_next: int, segment_length: float
) -> Trajectory:
    """Next window's warm start: drop executed segments, pad by holding speed."""
    x = sol.x[n_exec:]
    t = sol.t[n_exec:]
    if x.size < n_next + 1:
        pad = np.full(n_next + 1 - x.size, x[-1])
        x = np.concatenate([x, pad])
        hold = 2.0 * segment_length / np.maximum(pad[0] + pad[0], 1e-9)
        t = np.concatenate([t, np.full(n_next - t.size, hold)])
    return Trajectory(x[: n_next + 1].copy(), t[:n_next].copy())


def mpc_step(
    params: VehicleParams,
    road: RoadProfile,
    state: RouteState,
    tau_total: float,
    legal: SpeedBounds,
    cfg: MpcConfig,
    solver_cfg: SolverConfig,
    trace: TrafficTrace | None = None,
    pin_entry: bool = True,
) -> tuple[SolveResult, SpeedBounds, float, bool]:
    """Plan one window from the current state.

    Returns (solve result, bounds used, time budget, retightened flag).
    The trip-time term is dropped when the budget is exhausted or below
    the fastest admissible traversal of the window.
    """
    n_total = road.n_segments
    pos = state.position_index
    n_win = min(cfg.horizon_segments, n_total - pos)
    window_road = road.window(pos, n_win)
    if cfg.max_window_iters is not None and cfg.max_window_iters < solver_cfg.max_outer:
        solver_cfg = replace(solver_cfg, max_outer=cfg.max_window_iters)
    tau_w = window_time_budget(
        tau_total, state.elapsed_time, pos, n_total, n_win, road.segment_length
    )

    def legal_slice() -> SpeedBounds:
        return SpeedBounds(
            legal.lower[pos : pos + n_win + 1].copy(),
            legal.upper[pos : pos + n_win + 1].copy(),
        )

    if state.warm_x.size:
        warm = Trajectory(state.warm_x.copy(), state.warm_t.copy())
    else:
        warm = default_start(window_road, tau_w, legal_slice())

    def plan(candidate: Trajectory) -> tuple[SolveResult, SpeedBounds]:
        bounds = legal_slice()
        if trace is not None:
            probe = RouteState(
                position_index=pos,
                speed_now=state.speed_now,
                elapsed_time=state.elapsed_time,
                soc_now=state.soc_now,
                gap_now=state.gap_now,
                warm_x=candidate.x,
                warm_t=candidate.t,
            )
            bounds = bounds_for_window(trace, probe, bounds, road.segment_length)
        if pin_entry:
            bounds = bounds.pinned(0, state.speed_now)
        enforce = tau_w > _min_window_time(bounds.upper, road.segment_length)
        res = solve(
            params, window_road, tau_w, bounds, solver_cfg, start=candidate,
            enforce_time=enforce,
        )
        return res, bounds

    result, bounds = plan(warm)
    retightened = False
    if trace is not None:
        min_h = check_headways(
            trace, pos, result.traj.x, state.gap_now, road.segment_length
        )
        if min_h < trace.headway_s - 1e-9:
            result, bounds = plan(result.traj)
            retightened = True
    return result, bounds, tau_w, retightened


def run_route(
    params: VehicleParams,
    road: RoadProfile,
    tau_total: float,
    legal: SpeedBounds,
    cfg: MpcConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    trace: TrafficTrace | None = None,
    initial_speed: float | None = None,
    initial_soc: float = 1.0,
    label: str = "mpc",
) -> RouteResult:
    """Drive the whole route under receding-horizon control.

    With no traffic, a window that covers all remaining segments is
    executed in full (it is the final plan, nothing new can arrive), so a
    route no longer than the horizon reduces to a single solve.  Under
    traffic, execution advances ``cfg.replan_every`` segments at a time
    so bounds always reflect the freshly observed gap.  When
    ``initial_speed`` is given the first window pins the entry speed to
    it; otherwise the first boundary is free.
    """
    cfg = cfg or MpcConfig()
    solver_cfg = solver_cfg or SolverConfig()
    n = road.n_segments
    if legal.lower.size != n + 1:
        raise ValueError("legal bounds must cover every route boundary")
    state = RouteState(
        position_index=0,
        speed_now=initial_speed if initial_speed is not None else 0.0,
        elapsed_time=0.0,
        soc_now=initial_soc,
        gap_now=None,
        warm_x=np.empty(0),
        warm_t=np.empty(0),
    )
    exec_x: list[float] = []
    exec_t: list[float] = []
    dis_all: list[float] = []
    chg_all: list[float] = []
    headways: list[float] = []
    iters: list[int] = []
    convs: list[bool] = []
    walls: list[float] = []
    fallbacks: list[int] = []
    retights: list[int] = []
    window_index = 0
    while state.position_index < n:
        pos = state.position_index
        n_win = min(cfg.horizon_segments, n - pos)
        pin = pos > 0 or initial_speed is not None
        t0 = time.perf_counter()
        result, _, _, retightened = mpc_step(
            params, road, state, tau_total, legal, cfg, solver_cfg,
            trace=trace, pin_entry=pin,
        )
        walls.append(time.perf_counter() - t0)
        iters.append(result.iterations)
        convs.append(result.converged)
        if not result.converged:
            fallbacks.append(window_index)
        if retightened:
            retights.append(window_index)
        tail = n_win == n - pos and trace is None
        n_exec = n_win if tail else min(cfg.replan_every, n_win)
        sol = result.traj
        exec_road = road.window(pos, n_exec)
        exec_speeds = sol.x[: n_exec + 1].copy()
        if pos == 0:
            exec_x.append(float(exec_speeds[0]))
        dis, chg = soc_parts_arrays(params, exec_road, exec_speeds)
        for i in range(n_exec):
            pair = max(exec_speeds[i] + exec_speeds[i + 1], 1e-9)
            t_seg = 2.0 * road.segment_length / pair
            seg = pos + i
            if trace is not None and trace.present[seg]:
                if state.gap_now is None:
                    state.gap_now = float(trace.init_gap[seg])
                state.gap_now = update_gap(
                    state.gap_now, float(trace.lead_speed[seg]), t_seg,
                    road.segment_length,
                )
                out = exec_speeds[i + 1]
                headways.append(state.gap_now / out if out > 0 else math.inf)
            else:
                state.gap_now = None
                headways.append(math.nan)
            exec_x.append(float(exec_speeds[i + 1]))
            exec_t.append(t_seg)
            dis_all.append(float(dis[i]))
            chg_all.append(float(chg[i]))
            state.elapsed_time += t_seg
            state.soc_now -= float(dis[i] - chg[i])
        state.position_index += n_exec
        state.speed_now = float(exec_speeds[-1])
        if state.position_index < n:
            n_next = min(cfg.horizon_segments, n - state.position_index)
            warm = _shift_warm(sol, n_exec, n_next, road.segment_length)
            state.warm_x, state.warm_t = warm.x, warm.t
        window_index += 1
    x = np.array(exec_x)
    t = np.array(exec_t)
    dis = np.array(dis_all)
    chg = np.array(chg_all)
    dsoc = dis - chg
    soc_trace = initial_soc - np.concatenate([[0.0], np.cumsum(dsoc)])
    hw = np.array(headways)
    finite = hw[np.isfinite(hw)]
    return RouteResult(
        x=x,
        t=t,
        soc_delta=dsoc,
        discharge=dis,
        charge=chg,
        soc_trace=soc_trace,
        trip_time=float(np.sum(t)),
        energy=float(np.sum(dsoc)),
        headways=hw,
        min_headway=float(np.min(finite)) if finite.size else math.inf,
        window_iterations=iters,
        window_converged=convs,
        window_wall_times=walls,
        fallback_windows=fallbacks,
        retightened_windows=retights,
        label=label,
    )
