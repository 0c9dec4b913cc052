"""Trajectory-level energy objective and constraint machinery.

A trajectory over N segments is described by the boundary speeds
x_0..x_N and the per-segment traversal times T_1..T_N.  Treating the
times as free variables (coupled to the speeds only through consistency
constraints) makes both sub-problems of the alternating solver easy:

  * total battery SOC spent is a quadratic in the boundary speeds alone,
  * the time/speed consistency residuals are bilinear,

so we minimise an augmented Lagrangian that carries a trip-time target
and the per-segment consistency constraints with multipliers and
quadratic penalties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleParams
from .roads import RoadProfile


@dataclass
class Trajectory:
    """Boundary speeds (N+1) and per-segment times (N) over a road."""

    x: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        if self.x.ndim != 1 or self.t.ndim != 1:
            raise ValueError("speeds and times must be one-dimensional")
        if self.x.size != self.t.size + 1:
            raise ValueError(
                f"expected one more boundary speed than segment times, "
                f"got {self.x.size} speeds and {self.t.size} times"
            )
        if np.any(self.x < 0):
            raise ValueError("boundary speeds must be non-negative")

    @property
    def n_segments(self) -> int:
        return self.t.size

    def copy(self) -> "Trajectory":
        return Trajectory(self.x.copy(), self.t.copy())


@dataclass
class SpeedBounds:
    """Per-boundary box constraints on the speeds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be matching one-dimensional arrays")
        if np.any(self.lower < 0):
            raise ValueError("lower speed bounds must be non-negative")
        if np.any(self.upper < self.lower):
            raise ValueError("upper bound below lower bound")

    @classmethod
    def uniform(cls, n_boundaries: int, lower: float, upper: float) -> "SpeedBounds":
        return cls(np.full(n_boundaries, float(lower)), np.full(n_boundaries, float(upper)))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def pinned(self, index: int, value: float) -> "SpeedBounds":
        """Copy with one boundary fixed to a value (overrides the box)."""
        lo, hi = self.lower.copy(), self.upper.copy()
        lo[index] = hi[index] = value
        return SpeedBounds(lo, hi)


@dataclass
class EtaCoeffs:
    """Total SOC cost as eta0 + sum_j eta[j] * x_j^2 over boundary speeds."""

    eta0: float
    eta: np.ndarray

    def energy(self, x: np.ndarray) -> float:
        return self.eta0 + float(np.dot(self.eta, x * x))


@dataclass
class MultiplierState:
    """Dual variables and penalty weights of the augmented Lagrangian.

    rho_time may be zero, which drops the trip-time term entirely (used
    when the remaining time budget cannot bind); the per-segment
    consistency penalties must stay strictly positive.
    """

    lam: float
    mu: np.ndarray
    rho_time: float
    rho_cons: np.ndarray

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=float)
        self.rho_cons = np.asarray(self.rho_cons, dtype=float)
        if self.rho_time < 0:
            raise ValueError("time penalty must be non-negative")
        if np.any(self.rho_cons <= 0):
            raise ValueError("consistency penalties must be strictly positive")
        if self.mu.shape != self.rho_cons.shape:
            raise ValueError("one multiplier per segment required")

    @classmethod
    def fresh(cls, n_segments: int, rho_time: float, rho_cons: float) -> "MultiplierState":
        return cls(
            lam=0.0,
            mu=np.zeros(n_segments),
            rho_time=float(rho_time),
            rho_cons=np.full(n_segments, float(rho_cons)),
        )


def _force_split(
    params: VehicleParams, road: RoadProfile, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-segment force sign pattern, vectorised.

    Returns (accel, first_len, first_positive, second_positive): the
    first ``first_len`` metres of each segment carry one force sign, the
    remainder the other.  Same-sign segments get first_len == length
    (positive throughout) or 0 (negative throughout), leaving the empty
    stretch's sign flag irrelevant.  ``x`` may carry leading batch axes;
    all outputs follow them.
    """
    length = road.segment_length
    beta_air = road.beta_air(params)
    beta0 = road.beta0(params)
    x_in = x[..., :-1]
    x_out = x[..., 1:]
    accel = (x_out * x_out - x_in * x_in) / (2.0 * length)
    f_in = params.m * accel + beta0 + beta_air * x_in * x_in
    f_out = f_in + 2.0 * beta_air * accel * length
    pos = (f_in >= 0.0) & (f_out >= 0.0)
    neg = (f_in <= 0.0) & (f_out <= 0.0) & ~pos
    crossing = ~(pos | neg)
    with np.errstate(divide="ignore", invalid="ignore"):
        switch = np.where(crossing, -f_in / (2.0 * beta_air * accel), 0.0)
    switch = np.clip(switch, 0.0, length)
    first_len = np.where(pos, length, np.where(neg, 0.0, switch))
    first_positive = pos | (crossing & (f_in > 0.0))
    second_positive = pos | (crossing & (f_in < 0.0))
    return accel, first_len, first_positive, second_positive


def _betas(params: VehicleParams, positive: np.ndarray) -> np.ndarray:
    return np.where(positive, params.beta_plus, params.beta_minus)


def gamma_arrays(
    params: VehicleParams, road: RoadProfile, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-segment SOC-change coefficients (g0, g1, g2) for speeds ``x``.

    Vectorised counterpart of :func:`ecotruck.dynamics.gamma_coeffs`; the
    classification depends on x, so these are only valid near the speeds
    they were computed from.
    """
    length = road.segment_length
    beta_air = road.beta_air(params)
    beta0 = road.beta0(params)
    _, lf, first_pos, second_pos = _force_split(params, road, x)
    b_first = _betas(params, first_pos)
    b_second = _betas(params, second_pos)
    ls = length - lf
    m = params.m
    g0 = beta0 * (lf / b_first + ls / b_second)
    g1 = lf * (m + beta_air * lf) / b_first + ls * (m + beta_air * (lf + length)) / b_second
    g2 = beta_air * (lf / b_first + ls / b_second)
    d = params.soc_denominator
    return g0 / d, g1 / d, g2 / d


def soc_parts_arrays(
    params: VehicleParams, road: RoadProfile, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment (discharged, recharged) SOC fractions for speeds ``x``."""
    length = road.segment_length
    beta_air = road.beta_air(params)
    beta0 = road.beta0(params)
    accel, lf, first_pos, second_pos = _force_split(params, road, x)
    x_in2 = x[..., :-1] ** 2
    ls = length - lf
    m = params.m
    d = params.soc_denominator
    work_first = (m * accel + beta0) * lf + beta_air * lf * (x_in2 + accel * lf)
    work_second = (m * accel + beta0) * ls + beta_air * ls * (
        x_in2 + accel * ls + 2.0 * accel * lf
    )
    e_first = work_first / _betas(params, first_pos) / d
    e_second = work_second / _betas(params, second_pos) / d
    dis = np.where(first_pos, e_first, 0.0) + np.where(second_pos, e_second, 0.0)
    chg = -(
        np.where(first_pos, 0.0, e_first) + np.where(second_pos, 0.0, e_second)
    )
    # empty stretches contribute exactly zero regardless of their sign flag
    return np.maximum(dis, 0.0), np.maximum(chg, 0.0)


def segment_soc(
    params: VehicleParams, road: RoadProfile, x: np.ndarray
) -> np.ndarray:
    """Per-segment SOC change at boundary speeds ``x`` (batch axes allowed)."""
    x = np.asarray(x, dtype=float)
    g0, g1, g2 = gamma_arrays(params, road, x)
    x_in = x[..., :-1]
    x_out = x[..., 1:]
    accel = (x_out * x_out - x_in * x_in) / (2.0 * road.segment_length)
    return g0 + g1 * accel + g2 * x_in * x_in


def eta_coeffs(
    params: VehicleParams, road: RoadProfile, x: np.ndarray
) -> EtaCoeffs:
    """Regroup per-segment SOC quadratics onto the boundary speeds.

    Substituting a_i = (x_{i+1}^2 - x_i^2) / (2 l) into
    sum_i (g0_i + g1_i a_i + g2_i x_i^2) and collecting per boundary:

        eta_1     = g2_1 - g1_1 / (2 l)
        eta_j     = g2_j - g1_j / (2 l) + g1_{j-1} / (2 l)   (interior)
        eta_{N+1} =                       g1_N / (2 l)
    """
    x = np.asarray(x, dtype=float)
    g0, g1, g2 = gamma_arrays(params, road, x)
    inv2l = 1.0 / (2.0 * road.segment_length)
    eta = np.zeros(x.size)
    eta[:-1] += g2 - g1 * inv2l
    eta[1:] += g1 * inv2l
    return EtaCoeffs(eta0=float(np.sum(g0)), eta=eta)


def total_energy(params: VehicleParams, road: RoadProfile, x: np.ndarray) -> float:
    """Total per-pack SOC spent over the road at boundary speeds ``x``."""
    return float(np.sum(segment_soc(params, road, np.asarray(x, dtype=float))))


def residuals(traj: Trajectory, tau: float, road: RoadProfile) -> tuple[float, np.ndarray]:
    """Constraint violations: trip-time excess and per-segment consistency.

    The consistency residual T_i * (x_i + x_{i+1}) - 2 l vanishes exactly
    when T_i is the constant-acceleration traversal time.
    """
    time_res = float(np.sum(traj.t)) - tau
    cons = traj.t * (traj.x[:-1] + traj.x[1:]) - 2.0 * road.segment_length
    return time_res, cons


def lagrangian_terms(
    eta: EtaCoeffs,
    traj: Trajectory,
    mult: MultiplierState,
    tau: float,
    road: RoadProfile,
) -> float:
    """Augmented Lagrangian with the SOC quadratic frozen at ``eta``."""
    time_res, cons = residuals(traj, tau, road)
    value = eta.energy(traj.x)
    value += mult.lam * time_res + 0.5 * mult.rho_time * time_res * time_res
    value += float(np.dot(mult.mu, cons)) + 0.5 * float(np.dot(mult.rho_cons, cons * cons))
    return value


def augmented_lagrangian(
    params: VehicleParams,
    road: RoadProfile,
    traj: Trajectory,
    mult: MultiplierState,
    tau: float,
) -> float:
    """Energy plus weighted constraint terms at the trajectory itself."""
    return lagrangian_terms(eta_coeffs(params, road, traj.x), traj, mult, tau, road)


def grad_x_terms(
    eta: EtaCoeffs,
    traj: Trajectory,
    mult: MultiplierState,
    tau: float,
    road: RoadProfile,
) -> np.ndarray:
    """Gradient of :func:`lagrangian_terms` in the boundary speeds.

    With the SOC coefficients frozen, each boundary speed x_j sees
    2*eta_j*x_j from the energy plus the weighted consistency residuals
    of its two adjacent segments (one at the route ends).
    """
    _, cons = residuals(traj, tau, road)
    w = (mult.mu + mult.rho_cons * cons) * traj.t
    grad = 2.0 * eta.eta * traj.x
    grad[:-1] += w
    grad[1:] += w
    return grad


def grad_x(
    params: VehicleParams,
    road: RoadProfile,
    traj: Trajectory,
    mult: MultiplierState,
    tau: float,
) -> np.ndarray:
    """Speed gradient of the augmented Lagrangian at frozen coefficients."""
    return grad_x_terms(eta_coeffs(params, road, traj.x), traj, mult, tau, road)
