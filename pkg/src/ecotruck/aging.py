"""Battery cycling-aging model and life projection.

Capacity fade per operating period is a rate times the charge processed:
the rate depends on two stress features of the period's SOC-vs-charge
profile -- its charge-weighted mean and standard deviation.  The
aggregation period is fixed at one day-cycle (drive, then overnight
recharge to the day's starting SOC); capacity is held constant within a
day and the day's fade applied at its end, which is safe because daily
fade is ~1e-4 of capacity.

Day cycles are anchored on the ending SOC: each controller starts the
day as high as its net consumption requires so that everyone lands on
the same SOC before charging.  The drive profile is fixed in amp-hours
(the physics does not care how worn the pack is), so as capacity fades
the same route cuts deeper into the SOC range until the schedule no
longer fits -- that, or the 30% fade limit, ends the projected life.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class UndefinedStatsError(ValueError):
    """SOC statistics requested over zero processed charge."""


class RangeExceededError(RuntimeError):
    """Daily schedule does not fit in the battery's usable SOC window."""


@dataclass(frozen=True)
class AgingParams:
    """Fitted constants of the fade-rate law.

    rate = k1 * soc_dev * exp(k2 * soc_avg) + k3 * exp(k4 * soc_dev),
    in Ah faded per Ah processed.  Defaults come from
    :func:`fit_rate_params` on the two reference operating points shipped
    with the package (see DEFAULT_RATE_POINTS).
    """

    k1: float = 3.2524e-5
    k2: float = 4.6318
    k3: float = 1.0e-5
    k4: float = 1.0

    def __post_init__(self) -> None:
        if self.k3 <= 0:
            raise ValueError("baseline rate k3 must be positive")


# (soc_avg, soc_dev, rate in Ah/Ah) pairs the default constants reproduce:
# a constant-speed day cycle and an optimised day cycle on the same route.
DEFAULT_RATE_POINTS = (
    (0.53, 0.47, 1.94e-4),
    (0.50, 0.45, 1.64e-4),
)


@dataclass
class SocTrace:
    """Piecewise-linear SOC versus cumulative charge processed.

    ``q`` is nondecreasing cumulative Ah through the pack (charge and
    discharge both count); ``soc`` is the SOC at those breakpoints.
    """

    q: np.ndarray
    soc: np.ndarray

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        self.soc = np.asarray(self.soc, dtype=float)
        if self.q.shape != self.soc.shape or self.q.ndim != 1 or self.q.size < 1:
            raise ValueError("q and soc must be matching non-empty vectors")
        if np.any(np.diff(self.q) < -1e-9):
            raise ValueError("cumulative charge must be nondecreasing")

    @property
    def q_processed(self) -> float:
        return float(self.q[-1] - self.q[0])

    def concat(self, other: "SocTrace") -> "SocTrace":
        """Append another trace, shifting its charge axis to continue ours."""
        q2 = other.q - other.q[0] + self.q[-1]
        return SocTrace(
            np.concatenate([self.q, q2[1:]]) if other.q.size > 1 else self.q.copy(),
            np.concatenate([self.soc, other.soc[1:]]) if other.q.size > 1 else self.soc.copy(),
        )


@dataclass(frozen=True)
class CycleStats:
    soc_avg: float
    soc_dev: float
    q_processed: float


@dataclass
class AgingState:
    """Running battery condition during a life projection."""

    fade_total: float = 0.0        # fraction of nominal capacity lost
    capacity_now: float = 312.5    # Ah
    days_elapsed: int = 0
    range_now: float = 0.0         # km drivable on a full pack today


def soc_stats(trace: SocTrace) -> CycleStats:
    """Charge-weighted mean and standard deviation of a SOC trace.

    Both moments integrate the piecewise-linear SOC(Q) exactly (the limit
    of trapezoidal refinement): per linear piece with endpoint deviations
    e0, e1 from the mean, the squared-deviation integral is
    dQ * (e0^2 + e0*e1 + e1^2) / 3.
    """
    q_total = trace.q_processed
    if q_total <= 0:
        raise UndefinedStatsError("no charge processed over the trace")
    dq = np.diff(trace.q)
    s0 = trace.soc[:-1]
    s1 = trace.soc[1:]
    mean = float(np.sum(dq * (s0 + s1)) / (2.0 * q_total))
    e0 = s0 - mean
    e1 = s1 - mean
    var = float(np.sum(dq * (e0 * e0 + e0 * e1 + e1 * e1)) / (3.0 * q_total))
    return CycleStats(
        soc_avg=mean, soc_dev=math.sqrt(max(var, 0.0)), q_processed=q_total
    )


def fading_rate(stats: CycleStats, k: AgingParams) -> float:
    """Capacity faded per Ah processed at the given stress features."""
    return k.k1 * stats.soc_dev * math.exp(k.k2 * stats.soc_avg) + k.k3 * math.exp(
        k.k4 * stats.soc_dev
    )


def capacity_fade(stats: CycleStats, k: AgingParams) -> float:
    """Ah of capacity lost over the period the stats describe."""
    return fading_rate(stats, k) * stats.q_processed


def fit_rate_params(
    points: tuple[tuple[float, float, float], ...] = DEFAULT_RATE_POINTS,
    k3: float = 1.0e-5,
    k4: float = 1.0,
) -> AgingParams:
    """Calibrate k1, k2 against (soc_avg, soc_dev, rate) reference points.

    With k3, k4 pinned (two reference points cannot identify four
    constants), the remaining model is log-linear:
        log((rate - k3*e^{k4*dev}) / dev) = log k1 + k2 * avg,
    solved by least squares; exact when two points are given.
    """
    avgs = np.array([p[0] for p in points])
    devs = np.array([p[1] for p in points])
    rates = np.array([p[2] for p in points])
    resid = rates - k3 * np.exp(k4 * devs)
    if np.any(resid <= 0) or np.any(devs <= 0):
        raise ValueError("reference rates must exceed the k3 baseline")
    k2, log_k1 = np.polyfit(avgs, np.log(resid / devs), 1)
    return AgingParams(k1=float(np.exp(log_k1)), k2=float(k2), k3=k3, k4=k4)


def simulate_charge(
    soc_start: float,
    soc_end: float,
    rate_c: float,
    capacity_now: float,
    q_offset: float = 0.0,
) -> tuple[SocTrace, float]:
    """Constant-current charge segment: SOC linear in charge processed.

    Returns the trace piece and its duration in hours
    ((soc_end - soc_start) / rate_c).
    """
    if soc_end < soc_start:
        raise ValueError("charge must raise the SOC")
    if rate_c <= 0 or capacity_now <= 0:
        raise ValueError("charge rate and capacity must be positive")
    if soc_end == soc_start:
        return SocTrace(np.array([q_offset]), np.array([soc_start])), 0.0
    ah = (soc_end - soc_start) * capacity_now
    trace = SocTrace(
        np.array([q_offset, q_offset + ah]), np.array([soc_start, soc_end])
    )
    return trace, (soc_end - soc_start) / rate_c


@dataclass(frozen=True)
class DayConfig:
    """Daily duty cycle: drive the profile, then recharge overnight."""

    soc_end_target: float = 0.05   # SOC when the truck parks
    charge_rate_c: float = 0.1     # 1/h
    days_per_year: int = 260
    eol_fade: float = 0.30         # fraction of nominal capacity
    max_years: float = 50.0

    def __post_init__(self) -> None:
        if not 0 <= self.soc_end_target < 1:
            raise ValueError("ending SOC must lie in [0, 1)")
        if self.charge_rate_c <= 0 or self.days_per_year < 1:
            raise ValueError("charge rate and days per year must be positive")
        if not 0 < self.eol_fade < 1:
            raise ValueError("end-of-life fade must be a fraction in (0, 1)")


@dataclass(frozen=True)
class DailyDrive:
    """One day's driving, fixed in amp-hours (independent of pack wear).

    ``discharge_ah``/``charge_ah`` are non-negative per-step Ah through
    one pack; within a step the discharge is applied before the
    regeneration (exact for drive-then-brake stretches, and the step
    granularity -- one road segment -- makes the distinction negligible).
    """

    discharge_ah: np.ndarray
    charge_ah: np.ndarray
    distance_km: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "discharge_ah", np.asarray(self.discharge_ah, dtype=float))
        object.__setattr__(self, "charge_ah", np.asarray(self.charge_ah, dtype=float))
        if self.discharge_ah.shape != self.charge_ah.shape:
            raise ValueError("per-step discharge and charge must align")
        if np.any(self.discharge_ah < 0) or np.any(self.charge_ah < 0):
            raise ValueError("per-step Ah parts must be non-negative")

    @property
    def net_ah(self) -> float:
        return float(np.sum(self.discharge_ah - self.charge_ah))

    @property
    def throughput_ah(self) -> float:
        return float(np.sum(self.discharge_ah + self.charge_ah))

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Interleaved (dq, net-Ah-drawn) steps, discharge before charge."""
        n = self.discharge_ah.size
        dq = np.empty(2 * n)
        dq[0::2] = self.discharge_ah
        dq[1::2] = self.charge_ah
        drawn = np.empty(2 * n)
        drawn[0::2] = self.discharge_ah
        drawn[1::2] = -self.charge_ah
        return dq, drawn


def daily_drive_from_route(
    route, capacity_nominal: float, route_km: float, daily_km: float
) -> DailyDrive:
    """Tile a route's per-segment Ah parts out to the daily distance.

    ``route`` is an executed :class:`~ecotruck.mpc.RouteResult`; its SOC
    fractions are nominal-capacity based, so Ah = fraction * nominal Ah.
    The daily distance is rounded to whole route repetitions (driving the
    same road back and forth all day, as duty cycles do).
    """
    if route_km <= 0 or daily_km <= 0:
        raise ValueError("route and daily distances must be positive")
    repeats = max(1, int(round(daily_km / route_km)))
    dis = np.tile(np.asarray(route.discharge, dtype=float) * capacity_nominal, repeats)
    chg = np.tile(np.asarray(route.charge, dtype=float) * capacity_nominal, repeats)
    return DailyDrive(dis, chg, distance_km=repeats * route_km)


def drive_trace(
    drive: DailyDrive, capacity_now: float, soc_start: float, q_offset: float = 0.0
) -> SocTrace:
    """SOC-vs-charge trace of one day's driving on the current capacity."""
    dq, drawn = drive.steps()
    q = q_offset + np.concatenate([[0.0], np.cumsum(dq)])
    soc = soc_start - np.concatenate([[0.0], np.cumsum(drawn)]) / capacity_now
    return SocTrace(q, soc)


def simulate_day(
    day_drive_trace: SocTrace, cfg: DayConfig, capacity_now: float
) -> tuple[CycleStats, float]:
    """Stats and Ah throughput for drive-plus-overnight-charge.

    The charge leg returns the SOC to the day's starting value (so the
    cycle is closed and days repeat identically at fixed capacity).  The
    drive trace must stay inside [0, 1]: dipping below zero means the
    schedule exceeds the battery's range.
    """
    soc = day_drive_trace.soc
    if float(np.min(soc)) < -1e-12:
        raise RangeExceededError("SOC would fall below empty during the drive")
    if float(np.max(soc)) > 1.0 + 1e-12:
        raise RangeExceededError("SOC would exceed full during the drive")
    charge, _ = simulate_charge(
        float(soc[-1]), float(soc[0]), cfg.charge_rate_c, capacity_now,
        q_offset=float(day_drive_trace.q[-1]),
    )
    full = day_drive_trace.concat(charge)
    return soc_stats(full), full.q_processed


@dataclass
class LifeProjection:
    """Day-by-day capacity fade until end of life."""

    life_years: float
    days: int
    reason: str                      # "eol" | "range" | "max_years"
    fade_curve: np.ndarray           # fraction of nominal capacity, per day
    range_curve: np.ndarray          # km on a full pack, per day
    final_state: AgingState = field(default_factory=AgingState)
    day1_stats: CycleStats | None = None
    day1_throughput_ah: float = 0.0
    day1_dod: float = 0.0


def project_life(
    drive: DailyDrive,
    k: AgingParams,
    cfg: DayConfig,
    capacity_nominal: float,
) -> LifeProjection:
    """Iterate identical duty days until 30% fade or the schedule breaks.

    Within a day capacity is constant; the day's fade is applied at its
    end.  The day always ends at ``cfg.soc_end_target``, so the starting
    SOC is target + net/capacity -- once that exceeds 1 (or the drive
    dips below empty) the scenario is range-infeasible and the
    projection stops; on day 1 that is an error.
    """
    eol_days = int(cfg.max_years * cfg.days_per_year)
    fade_ah = 0.0
    fades: list[float] = []
    ranges: list[float] = []
    day1: tuple[CycleStats, float, float] | None = None
    reason = "max_years"
    days = 0
    for day in range(1, eol_days + 1):
        capacity = capacity_nominal - fade_ah
        soc_start = cfg.soc_end_target + drive.net_ah / capacity
        if soc_start > 1.0 + 1e-12:
            if day == 1:
                raise RangeExceededError(
                    f"day 1 needs starting SOC {soc_start:.4f} > 1"
                )
            reason = "range"
            break
        trace = drive_trace(drive, capacity, soc_start)
        try:
            stats, q_day = simulate_day(trace, cfg, capacity)
        except RangeExceededError:
            if day == 1:
                raise
            reason = "range"
            break
        fade_ah += capacity_fade(stats, k)
        days = day
        fades.append(fade_ah / capacity_nominal)
        # km a full-to-empty pack would cover at this duty's net draw rate
        ranges.append(
            (capacity_nominal - fade_ah) * drive.distance_km / drive.net_ah
            if drive.net_ah > 0 else math.inf
        )
        if day1 is None:
            dod = float(np.max(trace.soc) - np.min(trace.soc))
            day1 = (stats, q_day, dod)
        if fade_ah / capacity_nominal >= cfg.eol_fade:
            reason = "eol"
            break
    proj = LifeProjection(
        life_years=days / cfg.days_per_year,
        days=days,
        reason=reason,
        fade_curve=np.array(fades),
        range_curve=np.array(ranges),
        final_state=AgingState(
            fade_total=fade_ah / capacity_nominal,
            capacity_now=capacity_nominal - fade_ah,
            days_elapsed=days,
            range_now=float(ranges[-1]) if ranges else 0.0,
        ),
    )
    if day1 is not None:
        proj.day1_stats, proj.day1_throughput_ah, proj.day1_dod = day1
    return proj
