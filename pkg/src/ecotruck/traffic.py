"""Stochastic preceding-vehicle traffic and safe-headway speed bounds.

Traffic is modelled as alternating stretches of road with and without a
slower preceding vehicle.  Stretch lengths are exponentially distributed
(means configured per scenario), rounded up to whole segments; each
occupied stretch gets one preceding-vehicle speed and an initial gap
drawn once.  The planner never sees the future: it receives per-window
speed upper bounds derived from the current gap, tight enough that
keeping to them maintains a minimum time headway at every segment
boundary.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .objective import SpeedBounds

if TYPE_CHECKING:  # pragma: no cover
    from .mpc import RouteState

TRACE_CSV_HEADER = ("segment_index", "present", "v_p_mps", "d_init_m")


class CollisionError(RuntimeError):
    """Gap to the preceding vehicle closed completely."""


@dataclass(frozen=True)
class TrafficConfig:
    """Scenario parameters for the alternating-episode traffic model."""

    mean_with_km: float = 3.0       # mean length of occupied stretches
    mean_without_km: float = 3.0    # mean length of free stretches
    headway_s: float = 1.2          # minimum time headway to enforce
    init_headway_range_s: tuple[float, float] = (2.0, 4.0)
    lead_speed_range_kmh: tuple[float, float] = (70.0, 80.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mean_with_km <= 0 or self.mean_without_km <= 0:
            raise ValueError("episode length means must be positive")
        if self.headway_s <= 0:
            raise ValueError("headway must be positive")

    def with_seed(self, seed: int) -> "TrafficConfig":
        return TrafficConfig(
            self.mean_with_km,
            self.mean_without_km,
            self.headway_s,
            self.init_headway_range_s,
            self.lead_speed_range_kmh,
            seed,
        )


HEAVY_TRAFFIC = TrafficConfig(mean_with_km=3.0, mean_without_km=2.0)
NORMAL_TRAFFIC = TrafficConfig(mean_with_km=3.0, mean_without_km=3.0)
LIGHT_TRAFFIC = TrafficConfig(mean_with_km=2.0, mean_without_km=3.0)


@dataclass(frozen=True)
class Episode:
    start_segment: int
    n_segments: int
    present: bool
    raw_length_km: float            # exponential draw before segment rounding
    lead_speed: float = float("nan")   # m/s
    init_gap: float = float("nan")     # m, gap when the episode is entered


@dataclass
class TrafficTrace:
    """Per-segment traffic realisation over one route."""

    present: np.ndarray             # bool, preceding vehicle on segment
    lead_speed: np.ndarray          # m/s, NaN where absent
    init_gap: np.ndarray            # m, NaN where absent; constant per episode
    headway_s: float = 1.2
    episodes: list[Episode] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.present = np.asarray(self.present, dtype=bool)
        self.lead_speed = np.asarray(self.lead_speed, dtype=float)
        self.init_gap = np.asarray(self.init_gap, dtype=float)
        if not self.present.shape == self.lead_speed.shape == self.init_gap.shape:
            raise ValueError("trace arrays must share one shape")

    @property
    def n_segments(self) -> int:
        return self.present.size

    def episode_starts(self) -> np.ndarray:
        """Segment indices where an occupied episode begins."""
        rising = self.present.copy()
        rising[1:] &= ~self.present[:-1]
        return np.flatnonzero(rising)

    def raw_lengths_km(self, present_only: bool = True) -> np.ndarray:
        """Exponential episode-length draws behind this trace."""
        return np.array(
            [e.raw_length_km for e in self.episodes if e.present or not present_only]
        )


def generate_trace(
    route_length_m: float, cfg: TrafficConfig, segment_length: float = 50.0
) -> TrafficTrace:
    """Draw one alternating-episode traffic realisation covering the route.

    Episode lengths are exponential with the configured means (in km) and
    rounded up to whole segments; the first episode's kind is a fair coin
    flip.  Each occupied episode draws a constant preceding-vehicle speed
    and an initial gap equal to a 2-4 s headway at that speed.
    """
    if route_length_m <= 0 or segment_length <= 0:
        raise ValueError("route and segment lengths must be positive")
    n = int(math.ceil(route_length_m / segment_length - 1e-9))
    rng = np.random.default_rng(cfg.seed)
    present = np.zeros(n, dtype=bool)
    lead = np.full(n, np.nan)
    gap0 = np.full(n, np.nan)
    episodes: list[Episode] = []
    occupied = bool(rng.random() < 0.5)
    pos = 0
    vp_lo, vp_hi = (v / 3.6 for v in cfg.lead_speed_range_kmh)
    while pos < n:
        mean_km = cfg.mean_with_km if occupied else cfg.mean_without_km
        raw_km = float(rng.exponential(mean_km))
        n_seg = max(1, int(math.ceil(raw_km * 1000.0 / segment_length)))
        n_seg = min(n_seg, n - pos)
        if occupied:
            v_p = float(rng.uniform(vp_lo, vp_hi))
            d0 = float(rng.uniform(*cfg.init_headway_range_s)) * v_p
            present[pos : pos + n_seg] = True
            lead[pos : pos + n_seg] = v_p
            gap0[pos : pos + n_seg] = d0
            episodes.append(Episode(pos, n_seg, True, raw_km, v_p, d0))
        else:
            episodes.append(Episode(pos, n_seg, False, raw_km))
        pos += n_seg
        occupied = not occupied
    return TrafficTrace(present, lead, gap0, headway_s=cfg.headway_s, episodes=episodes)


def headway_speed_bound(
    x_in: float, gap: float, lead_speed: float, length: float, headway_s: float
) -> float:
    """Largest exit speed keeping the end-of-segment gap >= headway * speed.

    The gap evolves as gap + T*v_p - l with T = 2l/(x_in + x_out);
    requiring the end gap to cover ``headway_s`` seconds at x_out gives a
    quadratic in x_out whose positive root this returns (0 when even a
    crawl cannot satisfy it -- the truck must stop and wait out the
    segment at negligible speed).
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    h = headway_s
    big_l = gap - length
    disc = (h * x_in + big_l) ** 2 + 8.0 * h * length * lead_speed
    if disc < 0.0:
        return 0.0
    root = ((big_l - h * x_in) + math.sqrt(disc)) / (2.0 * h)
    return max(root, 0.0)


def update_gap(gap: float, lead_speed: float, t: float, length: float) -> float:
    """Gap after one segment: the lead advances T*v_p, the truck one length."""
    new_gap = gap + lead_speed * t - length
    if new_gap <= 0:
        raise CollisionError(
            f"gap closed ({gap:.2f} m -> {new_gap:.2f} m over {t:.2f} s)"
        )
    return new_gap


def bounds_for_window(
    trace: TrafficTrace,
    state: "RouteState",
    legal: SpeedBounds,
    segment_length: float,
) -> SpeedBounds:
    """Upper speed bounds over the next planning window under traffic.

    Walks the window segment by segment, propagating the gap with the
    warm-start candidate speeds (capped by each new bound as it appears)
    and capping every boundary at its headway bound.  The lower bound is
    released to zero wherever traffic binds -- the truck must be allowed
    to crawl.  Exact for the first segment, where the entry speed is the
    truck's actual speed; downstream segments are re-planned before they
    are executed, plus callers re-check the solved speeds once.
    """
    n_win = legal.lower.size - 1
    start = state.position_index
    warm = np.asarray(state.warm_x, dtype=float)
    if warm.size != n_win + 1:
        raise ValueError("warm start must cover the window boundaries")
    upper = legal.upper.copy()
    lower = legal.lower.copy()
    h = trace.headway_s
    gap = state.gap_now
    speed = min(warm[0], upper[0])
    any_traffic = False
    for j in range(n_win):
        seg = start + j
        if seg >= trace.n_segments or not trace.present[seg]:
            gap = None
            speed = min(warm[j + 1], upper[j + 1])
            continue
        any_traffic = True
        if gap is None:
            gap = float(trace.init_gap[seg])
        v_p = float(trace.lead_speed[seg])
        bound = headway_speed_bound(speed, gap, v_p, segment_length, h)
        upper[j + 1] = min(upper[j + 1], bound)
        exit_speed = min(warm[j + 1], upper[j + 1])
        pair = speed + exit_speed
        if pair > 0:
            gap = gap + v_p * (2.0 * segment_length / pair) - segment_length
        else:
            gap = gap + segment_length  # both crawling: lead pulls ahead
        gap = max(gap, 1e-6)
        speed = exit_speed
    if any_traffic:
        lower = np.zeros_like(lower)
        upper = np.maximum(upper, lower)
    return SpeedBounds(lower, upper)


def check_headways(
    trace: TrafficTrace,
    start: int,
    x: np.ndarray,
    gap_now: float | None,
    segment_length: float,
) -> float:
    """Smallest time headway reached if speeds ``x`` were driven.

    Propagates the gap with the actual candidate speeds; returns +inf if
    no preceding vehicle is met.  Used to validate a solved window before
    execution.
    """
    gap = gap_now
    min_headway = math.inf
    for j in range(x.size - 1):
        seg = start + j
        if seg >= trace.n_segments or not trace.present[seg]:
            gap = None
            continue
        if gap is None:
            gap = float(trace.init_gap[seg])
        v_p = float(trace.lead_speed[seg])
        pair = x[j] + x[j + 1]
        t = 2.0 * segment_length / pair if pair > 0 else math.inf
        advance = v_p * t if math.isfinite(t) else math.inf
        gap = gap + min(advance, 1e12) - segment_length
        if x[j + 1] > 0:
            min_headway = min(min_headway, gap / x[j + 1])
        elif gap <= 0:
            min_headway = min(min_headway, 0.0)
    return min_headway


def save_trace(trace: TrafficTrace, path: str | Path) -> Path:
    """Write the per-segment trace as CSV (episode metadata not retained)."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_CSV_HEADER)
    for i in range(trace.n_segments):
        if trace.present[i]:
            writer.writerow(
                [i, 1, repr(float(trace.lead_speed[i])), repr(float(trace.init_gap[i]))]
            )
        else:
            writer.writerow([i, 0, "", ""])
    path.write_text(buf.getvalue())
    return path


def load_trace(path: str | Path, headway_s: float = 1.2) -> TrafficTrace:
    """Read a trace CSV written by :func:`save_trace`."""
    path = Path(path)
    present, lead, gap0 = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRACE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4 or int(row[0]) != len(present):
                raise ValueError(f"{path}:{lineno}: malformed trace row")
            on = row[1].strip() == "1"
            present.append(on)
            lead.append(float(row[2]) if on else np.nan)
            gap0.append(float(row[3]) if on else np.nan)
    trace = TrafficTrace(
        np.array(present, dtype=bool),
        np.array(lead),
        np.array(gap0),
        headway_s=headway_s,
    )
    # recover episode bookkeeping (raw lengths unknown after a round trip)
    episodes: list[Episode] = []
    i = 0
    while i < trace.n_segments:
        j = i
        while j < trace.n_segments and trace.present[j] == trace.present[i]:
            j += 1
        if trace.present[i]:
            episodes.append(
                Episode(i, j - i, True, math.nan, float(lead[i]), float(gap0[i]))
            )
        else:
            episodes.append(Episode(i, j - i, False, math.nan))
        i = j
    trace.episodes = episodes
    return trace
