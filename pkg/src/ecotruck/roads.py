"""Road profiles: uniform-length graded segments with altitude bookkeeping.

Profiles come from altitude-vs-distance CSV files (resampled onto the
segment grid) or from a synthetic hilly-road generator.  Altitudes chain
exactly through the segment slopes so round-tripping through CSV is
lossless.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import RoadSegment, VehicleParams

ROAD_CSV_HEADER = ("distance_m", "altitude_m")


class RoadFormatError(ValueError):
    """Road CSV is malformed or describes an unusable profile."""


@dataclass
class RoadProfile:
    """Ordered uniform-length segments plus provenance metadata."""

    segments: list[RoadSegment]
    name: str = "road"
    source: str = "memory"
    _slopes: np.ndarray = field(init=False, repr=False)
    _altitudes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise RoadFormatError("a road needs at least one segment")
        lengths = {seg.length for seg in self.segments}
        if len(lengths) != 1:
            raise RoadFormatError("all segments must share one length")
        self._slopes = np.array([seg.slope for seg in self.segments])
        alts = [self.segments[0].altitude_start]
        for seg in self.segments:
            alts.append(seg.altitude_start + seg.length * math.tan(seg.slope))
        self._altitudes = np.array(alts)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def segment_length(self) -> float:
        return self.segments[0].length

    @property
    def total_length(self) -> float:
        return self.segment_length * self.n_segments

    @property
    def slopes(self) -> np.ndarray:
        """Grade angles (rad), one per segment."""
        return self._slopes

    @property
    def altitudes(self) -> np.ndarray:
        """Altitudes (m) at the N+1 segment boundaries."""
        return self._altitudes

    @property
    def distances(self) -> np.ndarray:
        """Distance from route start (m) at the N+1 boundaries."""
        return np.arange(self.n_segments + 1) * self.segment_length

    def beta_air(self, params: VehicleParams) -> float:
        return 0.5 * params.rho_air * params.a_f * params.c_d

    def beta0(self, params: VehicleParams) -> np.ndarray:
        """Rolling + grade force (N) per segment."""
        return params.m * params.g * (
            params.c_r * np.cos(self._slopes) + np.sin(self._slopes)
        )

    def window(self, start: int, n: int) -> "RoadProfile":
        """Sub-profile covering segments [start, start + n)."""
        if not 0 <= start < self.n_segments or n < 1 or start + n > self.n_segments:
            raise IndexError("window outside road")
        return RoadProfile(
            self.segments[start : start + n],
            name=f"{self.name}[{start}:{start + n}]",
            source=self.source,
        )

    def reversed(self) -> "RoadProfile":
        """Same road driven the other way: order flipped, slopes negated."""
        segs = []
        alt = float(self._altitudes[-1])
        for seg in reversed(self.segments):
            segs.append(RoadSegment(seg.length, -seg.slope, altitude_start=alt))
            alt += seg.length * math.tan(-seg.slope)
        return RoadProfile(segs, name=f"{self.name}-reversed", source=self.source)


def _segments_from_altitudes(
    altitudes: np.ndarray, segment_length: float
) -> list[RoadSegment]:
    segs = []
    alt = float(altitudes[0])
    for i in range(altitudes.size - 1):
        slope = math.atan((float(altitudes[i + 1]) - float(altitudes[i])) / segment_length)
        segs.append(RoadSegment(segment_length, slope, altitude_start=alt))
        alt += segment_length * math.tan(slope)
    return segs


def road_from_altitudes(
    altitudes: np.ndarray,
    segment_length: float,
    name: str = "road",
    source: str = "memory",
) -> RoadProfile:
    """Build a profile from boundary altitudes on a uniform grid."""
    altitudes = np.asarray(altitudes, dtype=float)
    if altitudes.ndim != 1 or altitudes.size < 2:
        raise RoadFormatError("need at least two altitude points")
    return RoadProfile(
        _segments_from_altitudes(altitudes, segment_length), name=name, source=source
    )


def load_road(path: str | Path, segment_length: float = 50.0) -> RoadProfile:
    """Read an altitude-vs-distance CSV and resample onto the segment grid.

    The file must have a ``distance_m,altitude_m`` header, strictly
    increasing distances starting at 0, and cover at least one full
    segment.  Altitudes are linearly interpolated at segment boundaries;
    any trailing distance shorter than one segment is dropped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RoadFormatError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != ROAD_CSV_HEADER:
            raise RoadFormatError(
                f"{path}: expected header {','.join(ROAD_CSV_HEADER)}, got {','.join(header)}"
            )
        dist, alt = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise RoadFormatError(f"{path}:{lineno}: expected two columns")
            try:
                dist.append(float(row[0]))
                alt.append(float(row[1]))
            except ValueError as exc:
                raise RoadFormatError(f"{path}:{lineno}: {exc}") from None
    if len(dist) < 2:
        raise RoadFormatError(f"{path}: need at least two data rows")
    d = np.array(dist)
    if d[0] != 0.0:
        raise RoadFormatError(f"{path}: distances must start at 0")
    if np.any(np.diff(d) <= 0):
        raise RoadFormatError(f"{path}: distances must be strictly increasing")
    n = int(math.floor(d[-1] / segment_length + 1e-9))
    if n < 1:
        raise RoadFormatError(
            f"{path}: road shorter than one {segment_length} m segment"
        )
    grid = np.arange(n + 1) * segment_length
    alts = np.interp(grid, d, np.array(alt))
    return road_from_altitudes(alts, segment_length, name=path.stem, source=str(path))


def save_road(road: RoadProfile, path: str | Path) -> Path:
    """Write boundary altitudes as a distance/altitude CSV (lossless)."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROAD_CSV_HEADER)
    for dist, alt in zip(road.distances, road.altitudes):
        writer.writerow([repr(float(dist)), repr(float(alt))])
    path.write_text(buf.getvalue())
    return path


def synth_road(
    length_km: float,
    hill_amplitude_m: float,
    hill_wavelength_km: float,
    seed: int = 0,
    segment_length: float = 50.0,
    name: str | None = None,
) -> RoadProfile:
    """Generate a rolling-hills profile: a primary sinusoid plus mild noise.

    The noise is a fixed set of incommensurate harmonics with random
    phases, scaled with the main amplitude so ``hill_amplitude_m = 0``
    yields an exactly flat road.  Peak slope stays close to the primary
    sinusoid's 2*pi*A/wavelength.
    """
    if length_km <= 0 or hill_wavelength_km <= 0:
        raise ValueError("length and wavelength must be positive")
    if hill_amplitude_m < 0:
        raise ValueError("amplitude must be non-negative")
    n = int(round(length_km * 1000.0 / segment_length))
    if n < 1:
        raise ValueError("road shorter than one segment")
    rng = np.random.default_rng(seed)
    d = np.arange(n + 1) * segment_length
    wavelength = hill_wavelength_km * 1000.0
    alts = hill_amplitude_m * np.sin(2.0 * np.pi * d / wavelength)
    # harmonics at irrational-ish wavelength ratios; slope contribution <= ~6%
    for rel_amp, rel_wave in ((0.020, 0.731), (0.015, 1.618), (0.025, 2.414)):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        alts += rel_amp * hill_amplitude_m * np.sin(
            2.0 * np.pi * d / (rel_wave * wavelength) + phase
        )
    alts -= alts[0]
    road = road_from_altitudes(alts, segment_length, source="synthetic")
    road.name = name or f"synth-{length_km:g}km-a{hill_amplitude_m:g}-w{hill_wavelength_km:g}-s{seed}"
    return road


def ramp_road(
    flat_before_km: float,
    grade_pct: float,
    grade_km: float,
    flat_after_km: float,
    segment_length: float = 50.0,
    name: str = "ramp",
) -> RoadProfile:
    """Flat approach, one constant grade, flat run-out.

    ``grade_pct`` is the altitude change per 100 m of distance (negative
    for a downhill).  Handy for isolating single-hill behaviour.
    """
    pieces = []
    for km, pct in (
        (flat_before_km, 0.0),
        (grade_km, grade_pct),
        (flat_after_km, 0.0),
    ):
        n = int(round(km * 1000.0 / segment_length))
        pieces.extend([pct] * n)
    if not pieces:
        raise ValueError("road has zero length")
    rise = np.array(pieces) * segment_length / 100.0
    alts = np.concatenate([[0.0], np.cumsum(rise)])
    return road_from_altitudes(alts, segment_length, name=name, source="synthetic")


def max_abs_slope(road: RoadProfile) -> float:
    """Largest grade magnitude on the road (rad)."""
    return float(np.max(np.abs(road.slopes)))
