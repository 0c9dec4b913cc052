"""Longitudinal dynamics of a battery-electric heavy-duty truck.

The route is discretised into road segments of fixed length over which the
acceleration is held constant, so the squared speed is affine in distance.
The net force the drivetrain must put on the road (tractive when positive,
braking/regenerating when negative) is then also affine in distance, which
lets the battery state-of-charge change over a segment be written in closed
form as a quadratic in (entry speed, acceleration).  The sign pattern of the
net force over the segment decides which drivetrain efficiency applies to
which stretch, giving four closed-form cases.

All state-of-charge quantities are per-pack fractions (the packs are
identical and share the load evenly), so a value of 0.01 means one percent
of one pack's capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class KinematicsError(ValueError):
    """Requested acceleration would drive the squared speed negative."""


class DegenerateSegmentError(ValueError):
    """Segment cannot be traversed (zero speed throughout)."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical truck, drivetrain and battery parameters.

    Defaults describe a 40 t tractor-trailer with a four-pack 800 V battery.
    """

    m: float = 40_000.0           # gross vehicle mass, kg
    c_r: float = 0.0055           # rolling resistance coefficient
    a_f: float = 10.0             # frontal area, m^2
    c_d: float = 0.36             # aerodynamic drag coefficient
    rho_air: float = 1.225        # air density, kg/m^3
    eta_discharge: float = 0.85   # battery-to-wheel efficiency (drive)
    eta_charge: float = 0.80      # wheel-to-battery efficiency (regen)
    u_volt: float = 800.0         # pack nominal voltage, V
    c_ah: float = 312.5           # pack nominal capacity, Ah
    n_packs: int = 4
    g: float = 9.81               # gravitational acceleration, m/s^2

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if not 0 < self.eta_discharge <= 1:
            raise ValueError("discharge efficiency must be in (0, 1]")
        if not 0 < self.eta_charge <= 1:
            raise ValueError("charge efficiency must be in (0, 1]")
        if self.u_volt <= 0 or self.c_ah <= 0:
            raise ValueError("pack voltage and capacity must be positive")
        if self.n_packs < 1:
            raise ValueError("need at least one battery pack")
        for name in ("c_r", "a_f", "c_d", "rho_air", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def beta_plus(self) -> float:
        """Force divisor on stretches with positive net force (discharging)."""
        return self.eta_discharge

    @property
    def beta_minus(self) -> float:
        """Force divisor on stretches with negative net force (regenerating).

        Greater than one: only ``eta_charge`` of the braking energy comes
        back into the pack.
        """
        return 1.0 / self.eta_charge

    @property
    def soc_denominator(self) -> float:
        """Energy (J) equivalent to the whole battery going from 1 to 0 SOC."""
        return self.u_volt * self.c_ah * 3600.0 * self.n_packs

    @property
    def pack_energy_j(self) -> float:
        """Energy content (J) of a single pack at nominal capacity."""
        return self.u_volt * self.c_ah * 3600.0


@dataclass(frozen=True)
class RoadSegment:
    """One constant-grade piece of road."""

    length: float                 # m
    slope: float                  # grade angle, rad
    altitude_start: float = 0.0   # m, at segment entry

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError("segment length must be positive")
        if not abs(self.slope) < math.pi / 2:
            raise ValueError("slope angle must lie in (-pi/2, pi/2)")

    @property
    def altitude_end(self) -> float:
        return self.altitude_start + self.length * math.tan(self.slope)


@dataclass(frozen=True)
class SegmentCoeffs:
    """Affine force model on a segment: F(v) = m*a + beta0 + beta_air * v^2."""

    beta_air: float               # kg/m, aerodynamic quadratic term
    beta0: float                  # N, rolling + grade force


@dataclass(frozen=True)
class ForceCase:
    """Sign pattern of the net force along a segment.

    case_id is one of:
      "I"   -- force >= 0 over the whole segment
      "II"  -- force <= 0 over the whole segment
      "III" -- positive at entry, crosses to negative
      "IV"  -- negative at entry, crosses to positive

    For the crossing cases, ``switch_distance`` is the distance from segment
    entry at which the force changes sign (clipped to the segment).
    """

    case_id: str
    switch_distance: float | None = None


@dataclass(frozen=True)
class GammaCoeffs:
    """Per-segment SOC change as a quadratic: dSOC = g0 + g1*a + g2*x_in^2.

    Units: per-pack SOC fraction (g0), fraction per (m/s^2) (g1), and
    fraction per (m/s)^2 (g2).
    """

    g0: float
    g1: float
    g2: float

    def soc(self, x_in: float, a: float) -> float:
        return self.g0 + self.g1 * a + self.g2 * x_in * x_in


def segment_coeffs(params: VehicleParams, seg: RoadSegment) -> SegmentCoeffs:
    """Speed-independent force coefficients for one segment."""
    beta_air = 0.5 * params.rho_air * params.a_f * params.c_d
    beta0 = params.m * params.g * (
        params.c_r * math.cos(seg.slope) + math.sin(seg.slope)
    )
    return SegmentCoeffs(beta_air=beta_air, beta0=beta0)


def track_force(params: VehicleParams, seg: RoadSegment, v: float, a: float) -> float:
    """Net longitudinal force the drivetrain applies at speed v, accel a (N)."""
    c = segment_coeffs(params, seg)
    return params.m * a + c.beta0 + c.beta_air * v * v


def state_transition(x_in: float, a: float, length: float) -> float:
    """Exit speed after holding acceleration ``a`` over ``length`` metres.

    Constant acceleration in distance: x_out^2 = x_in^2 + 2*a*length.
    """
    if x_in < 0:
        raise KinematicsError("entry speed must be non-negative")
    radicand = x_in * x_in + 2.0 * a * length
    if radicand < -1e-9 * max(1.0, x_in * x_in):
        raise KinematicsError(
            f"acceleration {a} over {length} m from {x_in} m/s stops the vehicle"
        )
    return math.sqrt(max(radicand, 0.0))


def accel_for_speeds(x_in: float, x_out: float, length: float) -> float:
    """Constant acceleration that takes x_in to x_out over ``length`` metres."""
    return (x_out * x_out - x_in * x_in) / (2.0 * length)


def segment_time(x_in: float, x_out: float, length: float) -> float:
    """Traversal time under constant acceleration: T = 2*l / (x_in + x_out)."""
    s = x_in + x_out
    if s <= 0:
        raise DegenerateSegmentError("segment with zero mean speed has no finite time")
    return 2.0 * length / s


def classify_case(
    params: VehicleParams, seg: RoadSegment, x_in: float, a: float
) -> ForceCase:
    """Decide the force sign pattern over the segment.

    The net force is affine in distance s: F(s) = F(0) + 2*beta_air*a*s, so
    checking both endpoints suffices.  An exact zero at either end is folded
    into the same-sign cases (the crossing cases are reserved for a strict
    sign change).
    """
    # validate kinematics up front so the returned case is meaningful
    state_transition(x_in, a, seg.length)
    c = segment_coeffs(params, seg)
    f_in = params.m * a + c.beta0 + c.beta_air * x_in * x_in
    f_out = f_in + 2.0 * c.beta_air * a * seg.length
    if f_in >= 0.0 and f_out >= 0.0:
        return ForceCase("I")
    if f_in <= 0.0 and f_out <= 0.0:
        return ForceCase("II")
    # strict sign change: a != 0 and beta_air > 0 guaranteed here
    switch = -f_in / (2.0 * c.beta_air * a)
    switch = min(max(switch, 0.0), seg.length)
    return ForceCase("III" if f_in > 0.0 else "IV", switch_distance=switch)


def _split_gammas(
    params: VehicleParams,
    coeffs: SegmentCoeffs,
    length: float,
    first_len: float,
    beta_first: float,
    beta_second: float,
) -> tuple[float, float, float]:
    """Quadratic SOC coefficients for a segment split into two stretches.

    The first ``first_len`` metres divide the force by ``beta_first``, the
    rest by ``beta_second``.  Integrating power over time (dt = ds/v, with
    v^2 affine in s) gives, per stretch of length L starting at distance s0
    from segment entry:

        integral F*v dt = (m*a + beta0)*L + beta_air*(x_in^2*L + a*L^2 + 2*a*s0*L)

    which for the second stretch (s0 = first_len, L = length - first_len)
    collapses the speed term to x_in^2 + a*(first_len + length).
    """
    m = params.m
    ba, b0 = coeffs.beta_air, coeffs.beta0
    lf = first_len
    ls = length - first_len
    g0 = b0 * (lf / beta_first + ls / beta_second)
    g1 = (
        lf * (m + ba * lf) / beta_first
        + ls * (m + ba * (lf + length)) / beta_second
    )
    g2 = ba * (lf / beta_first + ls / beta_second)
    d = params.soc_denominator
    return g0 / d, g1 / d, g2 / d


def gamma_coeffs(
    params: VehicleParams, seg: RoadSegment, case: ForceCase
) -> GammaCoeffs:
    """SOC-change coefficients for a segment given its force sign pattern."""
    c = segment_coeffs(params, seg)
    bp, bm = params.beta_plus, params.beta_minus
    if case.case_id == "I":
        first_len, beta_first, beta_second = seg.length, bp, bm
    elif case.case_id == "II":
        first_len, beta_first, beta_second = 0.0, bp, bm
    elif case.case_id == "III":
        first_len, beta_first, beta_second = case.switch_distance, bp, bm
    elif case.case_id == "IV":
        first_len, beta_first, beta_second = case.switch_distance, bm, bp
    else:
        raise ValueError(f"unknown force case {case.case_id!r}")
    g0, g1, g2 = _split_gammas(params, c, seg.length, first_len, beta_first, beta_second)
    return GammaCoeffs(g0=g0, g1=g1, g2=g2)


def soc_change(
    params: VehicleParams, seg: RoadSegment, x_in: float, a: float
) -> float:
    """Per-pack SOC drawn from the battery over one segment.

    Positive when the pack discharges, negative when regeneration dominates.
    """
    case = classify_case(params, seg, x_in, a)
    return gamma_coeffs(params, seg, case).soc(x_in, a)


def soc_change_parts(
    params: VehicleParams, seg: RoadSegment, x_in: float, a: float
) -> tuple[float, float]:
    """Split the segment SOC change into (discharged, recharged) parts.

    Both values are non-negative per-pack SOC fractions; their difference
    equals :func:`soc_change`.  Needed for charge-throughput accounting,
    where discharge and regeneration both cycle the battery.
    """
    case = classify_case(params, seg, x_in, a)
    c = segment_coeffs(params, seg)
    m, ba, b0 = params.m, c.beta_air, c.beta0
    length = seg.length
    d = params.soc_denominator

    def stretch(s0: float, sl: float, beta: float) -> float:
        # integral of F*v dt over [s0, s0+sl], divided by beta and normalised
        work = (m * a + b0) * sl + ba * sl * (x_in * x_in + a * sl + 2.0 * a * s0)
        return work / beta / d

    if case.case_id == "I":
        return stretch(0.0, length, params.beta_plus), 0.0
    if case.case_id == "II":
        return 0.0, -stretch(0.0, length, params.beta_minus)
    sw = case.switch_distance
    if case.case_id == "III":
        dis = stretch(0.0, sw, params.beta_plus)
        chg = -stretch(sw, length - sw, params.beta_minus)
    else:  # IV
        chg = -stretch(0.0, sw, params.beta_minus)
        dis = stretch(sw, length - sw, params.beta_plus)
    return dis, chg
