"""Alternating trajectory optimiser and the exhaustive grid oracle.

The augmented Lagrangian from :mod:`ecotruck.objective` is minimised by
alternating three cheap updates:

  1. boundary speeds: projected Newton steps on a locally-frozen
     quadratic model, interleaved with exact alternating-parity
     coordinate scans that step over the curvature kinks where the
     in-segment force changes sign (optionally, joint pair scans plus
     pattern-move extrapolation for deeper but slower descent);
  2. segment times: exact minimiser of a strictly convex quadratic whose
     Hessian is diagonal plus rank one, solved in closed form;
  3. multipliers: gradient ascent with the penalty weights as step sizes.

The raw SOC objective is tiny (one road segment costs ~1e-5 of a pack)
next to O(1) constraint penalties, which would leave the speed update
numerically blind to energy.  The solver therefore scales the energy
term by ``energy_scale`` internally; multipliers and residuals live in
natural units (seconds, metres) and reported energies are unscaled.

``brute_force_oracle`` enumerates boundary speeds on a grid and returns
the cheapest trajectory whose physical trip time lands inside a
tolerance band around the target.  It meets in the middle (split the
route, share one boundary, range-min over time windows), which is exact
yet fast enough for the few-segment cases it is meant for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .dynamics import DegenerateSegmentError, VehicleParams, soc_change
from .objective import (
    EtaCoeffs,
    MultiplierState,
    SpeedBounds,
    Trajectory,
    eta_coeffs,
    gamma_arrays,
    residuals,
    segment_soc,
    total_energy,
)
from .roads import RoadProfile


class NoFeasiblePointError(ValueError):
    """Grid search found no trajectory inside the time tolerance band."""


# pattern-move extrapolation ladder (multiples of one round's displacement)
ALPHAS = 2.0 ** np.arange(1, 11)


@dataclass(frozen=True)
class SolverConfig:
    """Tunables of the alternating solver.

    eps_step bounds the iterate movement ||dx|| + ||dT|| and eps_res the
    combined constraint residual norm; both must drop below their bound
    to declare convergence.  ``energy_scale`` is internal conditioning
    only (see module docstring) and does not change reported energies.
    """

    eps_step: float = 1e-3
    eps_res: float = 1e-3
    max_outer: int = 500
    x_step: float = 0.1          # m/s, fallback steepest-descent step, halved on backtracking
    x_inner_iters: int = 3       # rounds of Newton step plus coordinate scan per outer iteration
    x_scan_points: int = 17      # grid points per coordinate-scan stage
    x_scan_stages: int = 6       # successive 8x refinements of the scan bracket
    x_extended_moves: bool = False  # joint pair scans + pattern extrapolation (see update_x)
    max_halvings: int = 20
    rho_time: float = 1.0
    rho_cons: float = 1.0
    energy_scale: float = 2.0e6
    penalty_check: int = 10      # outer iterations between residual-progress checks
    penalty_shrink: float = 0.85 # residual decrease demanded per check window
    penalty_growth: float = 3.0  # stagnant-constraint penalty multiplier
    penalty_max: float = 1e6
    time_gain: float = 1.0       # trip-time dual-loop gain through the time block
    time_floor: float = 1e-3     # s, lower clamp for the time update
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.eps_step, self.eps_res, self.x_step, self.time_floor) <= 0:
            raise ValueError("tolerances and steps must be positive")
        if self.max_outer < 1 or self.x_inner_iters < 1 or self.max_halvings < 0:
            raise ValueError("iteration counts must be positive")
        if self.x_scan_points < 5 or self.x_scan_stages < 1:
            raise ValueError("coordinate scan needs at least 5 points and 1 stage")
        if self.rho_time < 0 or self.rho_cons <= 0 or self.energy_scale <= 0:
            raise ValueError("penalties and scaling must be positive (rho_time may be 0)")
        if self.penalty_check < 1 or not 0 < self.penalty_shrink < 1:
            raise ValueError("penalty check interval/shrink factor out of range")
        if self.penalty_growth < 1 or self.penalty_max < self.rho_cons:
            raise ValueError("penalty growth must be >= 1 and cap above rho_cons")
        if self.time_gain <= 0:
            raise ValueError("time-dual gain must be positive")


@dataclass
class SolveResult:
    """Outcome of one trajectory solve."""

    traj: Trajectory
    energy: float                      # per-pack SOC spent, unscaled
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    time_residual: float = 0.0
    cons_residual_norm: float = 0.0
    multipliers: MultiplierState | None = None


def scaled_eta(
    params: VehicleParams, road: RoadProfile, x: np.ndarray, cfg: SolverConfig
) -> EtaCoeffs:
    """SOC quadratic at ``x`` with the solver's internal energy scaling."""
    raw = eta_coeffs(params, road, x)
    return EtaCoeffs(eta0=raw.eta0 * cfg.energy_scale, eta=raw.eta * cfg.energy_scale)


def update_x(
    x_prev: np.ndarray,
    t: np.ndarray,
    mult: MultiplierState,
    tau: float,
    road: RoadProfile,
    bounds: SpeedBounds,
    cfg: SolverConfig,
    params: VehicleParams,
) -> np.ndarray:
    """Minimise the augmented Lagrangian in the speeds with times fixed.

    The SOC quadratic's coefficients depend on the speeds through the
    force-sign classification, but the per-segment SOC integral is C^1
    in the speeds (the integrand is continuous where the force crosses
    zero), so differentiating with the coefficients held constant gives
    the exact gradient.  The objective is neither C^2 nor convex,
    though: where the drive force changes sign inside a segment, the
    switch point sweeps across it at ~1e4 m per m/s of boundary speed,
    spiking the curvature orders of magnitude above the smooth
    background, and the efficiency gap between discharging and
    recharging can favour alternating push/coast patterns over a steady
    cruise.  Line searches stall on both features, so each inner round
    combines two monotone moves:

      * a projected Newton step on the locally-frozen quadratic model
        (tridiagonal Hessian: SOC curvature plus the nearest-neighbour
        consistency penalty), clamped to diagonal dominance where
        regeneration makes it indefinite, capped, halved against the
        true re-classified objective, with a steepest-descent step of
        at most ``cfg.x_step`` m/s as fallback -- global progress on
        the smooth part;

      * an exact coordinate scan of alternating parity: with every
        other boundary speed held fixed, a speed's one-dimensional cost
        only involves its two adjacent segments, so a whole parity
        class is scanned in one batched evaluation per stage.  Each
        coordinate's feasible interval is searched on a coarse grid
        that is then repeatedly re-centred on the incumbent and
        refined; this steps straight over kinks and between basins.

    With ``x_extended_moves`` two further moves join in.  Scans that
    translate adjacent boundary pairs together: the consistency
    penalty is blind to moving a segment's two speeds in unison (its
    Hessian blocks are rank one), and coordinates parked exactly on a
    force kink look locally optimal one at a time, so extending a
    coasting stretch takes a joint move no single-coordinate pass can
    make (pairs three apart share no segment, so each of three phases
    scans in one batched evaluation per stage).  And a pattern-move
    extrapolation along each round's net displacement, which
    fast-forwards the crawl when the valley floor runs oblique to
    every scanned direction.  The extended moves keep finding real
    descent long after the cheap ones stall -- a few percent extra on
    coast-heavy profiles -- but need several times the iterations and
    wall time, which is why they are opt-in rather than default.

    All moves only accept strict decreases of the true objective.
    With the times fixed the trip-time terms are constant and drop out
    of all comparisons.
    """
    length = road.segment_length
    inv2l = 1.0 / (2.0 * length)
    scale = cfg.energy_scale
    mu, rho = mult.mu, mult.rho_cons
    halves = 0.5 ** np.arange(cfg.max_halvings + 1)
    t_sq = rho * t * t

    def seg_costs(xs: np.ndarray) -> np.ndarray:
        # per-segment scaled SOC plus consistency multiplier/penalty terms
        r = t * (xs[..., :-1] + xs[..., 1:]) - 2.0 * length
        return scale * segment_soc(params, road, xs) + mu * r + 0.5 * rho * r * r

    def gradient(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g0, g1, g2 = gamma_arrays(params, road, xs)
        eta = np.zeros(xs.size)
        eta[:-1] += g2 - g1 * inv2l
        eta[1:] += g1 * inv2l
        r = t * (xs[:-1] + xs[1:]) - 2.0 * length
        w = (mu + rho * r) * t
        out = 2.0 * scale * eta * xs
        out[:-1] += w
        out[1:] += w
        return out, eta

    def one_sided_slopes(x: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
        # true forward/backward difference of every coordinate's 1-D cost
        # in four batched rows: perturbing a whole parity class touches
        # each segment at exactly one endpoint
        rows = np.tile(x, (4, 1))
        rows[0, 0::2] += h
        rows[1, 0::2] -= h
        rows[2, 1::2] += h
        rows[3, 1::2] -= h
        pert = np.pad(seg_costs(rows), ((0, 0), (1, 1)))
        base = np.pad(seg_costs(x), 1)
        f_base = base[:-1] + base[1:]
        f = pert[:, :-1] + pert[:, 1:]
        idx = np.arange(x.size)
        f_plus = np.where(idx % 2 == 0, f[0], f[2])
        f_minus = np.where(idx % 2 == 0, f[1], f[3])
        return (f_plus - f_base) / h, (f_base - f_minus) / h

    def newton_step(x: np.ndarray, value: float) -> tuple[np.ndarray, float, float]:
        grad, eta = gradient(x)
        # coordinates pressed against a bound in the descent direction
        # cannot move; solve the model on the ones that can
        free = ((x > bounds.lower) | (grad < 0.0)) & ((x < bounds.upper) | (grad > 0.0))
        if cfg.x_extended_moves:
            # a coordinate parked exactly on a force-sign kink is a local
            # 1-D minimum whose frozen gradient only sees one side; left
            # in, that one-sided slope poisons the whole tridiagonal
            # solve, so detect such coordinates (V-shaped slice with a
            # slope jump far above curvature-sized) and pin them for this
            # step; the scans park coordinates on kinks, so this mostly
            # matters once they have
            h_kink = 1e-5
            s_plus, s_minus = one_sided_slopes(x, h_kink)
            jump = s_plus - s_minus
            kink = (s_minus < 0.0) & (s_plus > 0.0)
            kink &= jump > 1e3 * h_kink * np.maximum(np.abs(grad), 1.0)
            free &= ~kink
        gmax = float(np.max(np.abs(grad), where=free, initial=0.0))
        if gmax < 1e-14:
            return x, value, 0.0
        diag = 2.0 * scale * eta
        diag[:-1] += t_sq
        diag[1:] += t_sq
        off = np.where(free[:-1] & free[1:], t_sq, 0.0)
        diag = np.where(free, diag, 1.0)
        # clamp to diagonal dominance with a 1% margin where regeneration
        # turns the SOC term concave; anything stiffer would also swallow
        # the penalty's rank-one structure, whose near-null translation
        # modes are exactly the long glide moves the step must deliver
        floor = np.zeros(x.size)
        floor[:-1] += off
        floor[1:] += off
        diag = np.maximum(diag, 1.01 * floor + 1e-12)
        ab = np.zeros((3, x.size))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        rhs = np.where(free, -grad, 0.0)
        d = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True)
        d = np.where(free, d, 0.0)
        # the model may steer free coordinates into their bound, where
        # clipping would silently turn the step into ascent; drop them
        d[(d > 0.0) & (x >= bounds.upper)] = 0.0
        d[(d < 0.0) & (x <= bounds.lower)] = 0.0
        dmax = float(np.max(np.abs(d)))
        if dmax > 2.0:
            d *= 2.0 / dmax
        steepest = np.where(free, -(cfg.x_step / gmax) * grad, 0.0)
        if not float(d @ grad) < 0.0:
            d = steepest
        for trial in (d, steepest):
            cands = bounds.clip(x + halves[:, None] * trial)
            vals = np.sum(seg_costs(cands), axis=-1)
            ok = np.flatnonzero(vals < value)
            if ok.size:
                k = int(ok[0])
                moved = float(np.max(np.abs(cands[k] - x)))
                return cands[k], float(vals[k]), moved
            if trial is steepest:
                break
        return x, value, 0.0

    def parity_scan(x: np.ndarray, j_idx: np.ndarray) -> tuple[np.ndarray, float]:
        # boundary j only touches segments j-1 and j, so same-parity
        # coordinates decouple and their 1-D costs come out of one
        # batched per-segment evaluation
        pad = np.concatenate(([0.0], seg_costs(x), [0.0]))
        f_cur = pad[j_idx] + pad[j_idx + 1]
        lo, hi = bounds.lower[j_idx], bounds.upper[j_idx]
        a, b = lo.copy(), hi.copy()
        best_c = x[j_idx].copy()
        best_f = f_cur.copy()
        cols = np.arange(j_idx.size)
        weights = np.linspace(0.0, 1.0, cfg.x_scan_points)[:, None]
        for _ in range(cfg.x_scan_stages):
            cand = a + (b - a) * weights
            batch = np.tile(x, (cfg.x_scan_points, 1))
            batch[:, j_idx] = cand
            seg_pad = np.pad(seg_costs(batch), ((0, 0), (1, 1)))
            loc = seg_pad[:, j_idx] + seg_pad[:, j_idx + 1]
            k = np.argmin(loc, axis=0)
            c_k, f_k = cand[k, cols], loc[k, cols]
            better = f_k < best_f
            best_c = np.where(better, c_k, best_c)
            best_f = np.where(better, f_k, best_f)
            h = (b - a) / (cfg.x_scan_points - 1)
            a = np.maximum(c_k - h, lo)
            b = np.minimum(c_k + h, hi)
        improve = best_f < f_cur
        if not np.any(improve):
            return x, 0.0
        x_new = x.copy()
        x_new[j_idx] = np.where(improve, best_c, x[j_idx])
        return x_new, float(np.max(np.abs(x_new - x)))

    def pair_scan(x: np.ndarray, j_idx: np.ndarray) -> tuple[np.ndarray, float]:
        # translate boundaries j and j+1 by a shared delta; the local
        # cost spans segments j-1, j, j+1, disjoint across a phase
        pad = np.concatenate(([0.0], seg_costs(x), [0.0], [0.0]))
        f_cur = pad[j_idx] + pad[j_idx + 1] + pad[j_idx + 2]
        a = np.maximum(bounds.lower[j_idx] - x[j_idx],
                       bounds.lower[j_idx + 1] - x[j_idx + 1])
        b = np.minimum(bounds.upper[j_idx] - x[j_idx],
                       bounds.upper[j_idx + 1] - x[j_idx + 1])
        lo, hi = a.copy(), b.copy()
        best_d = np.zeros(j_idx.size)
        best_f = f_cur.copy()
        cols = np.arange(j_idx.size)
        weights = np.linspace(0.0, 1.0, cfg.x_scan_points)[:, None]
        for _ in range(cfg.x_scan_stages):
            cand = a + (b - a) * weights
            batch = np.tile(x, (cfg.x_scan_points, 1))
            batch[:, j_idx] += cand
            batch[:, j_idx + 1] += cand
            seg_pad = np.pad(seg_costs(batch), ((0, 0), (1, 2)))
            loc = (seg_pad[:, j_idx] + seg_pad[:, j_idx + 1]
                   + seg_pad[:, j_idx + 2])
            k = np.argmin(loc, axis=0)
            d_k, f_k = cand[k, cols], loc[k, cols]
            better = f_k < best_f
            best_d = np.where(better, d_k, best_d)
            best_f = np.where(better, f_k, best_f)
            h = (b - a) / (cfg.x_scan_points - 1)
            a = np.maximum(d_k - h, lo)
            b = np.minimum(d_k + h, hi)
        improve = best_f < f_cur
        if not np.any(improve):
            return x, 0.0
        x_new = x.copy()
        shift = np.where(improve, best_d, 0.0)
        x_new[j_idx] += shift
        x_new[j_idx + 1] += shift
        return x_new, float(np.max(np.abs(shift)))

    def pattern_move(
        x: np.ndarray, value: float, d: np.ndarray
    ) -> tuple[np.ndarray, float, float]:
        # Hooke-Jeeves pattern move: when the valley floor runs oblique
        # to every scanned direction, the exploratory moves inch along
        # it in near-identical steps; extrapolating their net
        # displacement replays many such rounds in one batched
        # evaluation of the true objective
        if float(np.max(np.abs(d))) <= 0.0:
            return x, value, 0.0
        cands = bounds.clip(x + ALPHAS[:, None] * d)
        vals = np.sum(seg_costs(cands), axis=-1)
        k = int(np.argmin(vals))
        if not vals[k] < value:
            return x, value, 0.0
        moved = float(np.max(np.abs(cands[k] - x)))
        return cands[k], float(vals[k]), moved

    x = bounds.clip(np.asarray(x_prev, dtype=float))
    value = float(np.sum(seg_costs(x)))
    movable = bounds.upper > bounds.lower
    parities = []
    for p in (0, 1):
        j_idx = np.arange(p, x.size, 2)
        j_idx = j_idx[movable[j_idx]]
        if j_idx.size:
            parities.append(j_idx)
    pair_phases = []
    if cfg.x_extended_moves:
        for p in (0, 1, 2):
            j_idx = np.arange(p, x.size - 1, 3)
            j_idx = j_idx[movable[j_idx] & movable[j_idx + 1]]
            if j_idx.size:
                pair_phases.append(j_idx)
    pairs_live = True
    for _ in range(cfg.x_inner_iters):
        x_round = x
        x, value, moved = newton_step(x, value)
        scanned = 0.0
        for j_idx in parities:
            x, mv = parity_scan(x, j_idx)
            scanned = max(scanned, mv)
        # pair translations are only worth their cost when the cheap
        # moves stall, and once they come up dry the state has barely
        # changed, so they stay off for the rest of this call
        if pairs_live and pair_phases and max(moved, scanned) < 1e-2:
            paired = 0.0
            for j_idx in pair_phases:
                x, mv = pair_scan(x, j_idx)
                paired = max(paired, mv)
            scanned = max(scanned, paired)
            pairs_live = paired > 0.0
        if scanned > 0.0:
            value = float(np.sum(seg_costs(x)))
        jumped = 0.0
        if cfg.x_extended_moves:
            x, value, jumped = pattern_move(x, value, x - x_round)
        if max(moved, scanned, jumped) < 1e-8:
            break
    return x


def update_t(
    x: np.ndarray,
    mult: MultiplierState,
    tau: float,
    road: RoadProfile,
    time_floor: float = 1e-3,
) -> np.ndarray:
    """Exact minimiser of the Lagrangian in the segment times.

    With speeds fixed the time terms form a strictly convex quadratic
    whose Hessian is diag(rho_cons * s^2) + rho_time * ones, s being the
    per-segment boundary-speed sums; one Sherman-Morrison step solves it.
    Times are clamped to a small positive floor.
    """
    s = x[:-1] + x[1:]
    if np.any(s <= 0):
        raise DegenerateSegmentError("segment with both boundary speeds zero")
    length = road.segment_length
    diag = mult.rho_cons * s * s
    rhs = mult.rho_time * tau - mult.lam - mult.mu * s + 2.0 * length * mult.rho_cons * s
    d_inv = rhs / diag
    if mult.rho_time > 0.0:
        inv_ones = 1.0 / diag
        correction = mult.rho_time * np.sum(d_inv) / (1.0 + mult.rho_time * np.sum(inv_ones))
        t = d_inv - correction * inv_ones
    else:
        t = d_inv
    return np.maximum(t, time_floor)


def update_multipliers(
    mult: MultiplierState, traj: Trajectory, tau: float, road: RoadProfile
) -> MultiplierState:
    """Dual ascent: one gradient step with the penalties as step sizes."""
    time_res, cons = residuals(traj, tau, road)
    return replace(
        mult,
        lam=mult.lam + mult.rho_time * time_res,
        mu=mult.mu + mult.rho_cons * cons,
    )


def default_start(
    road: RoadProfile, tau: float, bounds: SpeedBounds
) -> Trajectory:
    """Constant-speed start: route length over the time target, boxed."""
    v = road.total_length / tau if tau > 0 else float(np.mean(bounds.upper))
    x = bounds.clip(np.full(road.n_segments + 1, v))
    s = x[:-1] + x[1:]
    with np.errstate(divide="ignore"):
        t = np.where(s > 0, 2.0 * road.segment_length / np.maximum(s, 1e-30), 1.0)
    return Trajectory(x, t)


def solve(
    params: VehicleParams,
    road: RoadProfile,
    tau: float,
    bounds: SpeedBounds,
    cfg: SolverConfig | None = None,
    start: Trajectory | None = None,
    enforce_time: bool = True,
) -> SolveResult:
    """Run the alternating optimiser to convergence or ``max_outer``.

    ``enforce_time=False`` drops the trip-time constraint (zero penalty,
    zero multiplier), leaving only energy and time/speed consistency;
    used when the remaining schedule cannot bind.  On non-convergence the
    iterate with the smallest combined residual norm is returned and
    flagged.
    """
    cfg = cfg or SolverConfig()
    if tau <= 0 and enforce_time:
        raise ValueError("trip-time target must be positive")
    n = road.n_segments
    if bounds.lower.size != n + 1:
        raise ValueError(
            f"bounds cover {bounds.lower.size} boundaries, road has {n + 1}"
        )
    traj = (start or default_start(road, tau, bounds)).copy()
    traj.x = bounds.clip(traj.x)
    rho_time = cfg.rho_time if enforce_time else 0.0
    mult = MultiplierState.fresh(n, rho_time, cfg.rho_cons)
    history: list[float] = []
    best: tuple[float, Trajectory, int] | None = None
    converged = False
    iterations = 0
    time_res, cons = residuals(traj, tau, road)
    # a consistency residual still above its share of the tolerance must
    # shrink between checks, else its penalty grows; one that flips sign
    # is overshooting (the dual step is the penalty), so back off instead
    res_floor = cfg.eps_res / (2.0 * math.sqrt(n + 1.0))
    check_cons = np.abs(cons)
    sign_cons = np.sign(cons)
    flip_cons = np.zeros(n, dtype=bool)
    for iterations in range(1, cfg.max_outer + 1):
        x_new = update_x(traj.x, traj.t, mult, tau, road, bounds, cfg, params)
        if enforce_time and cfg.rho_time > 0:
            # the time block responds to the trip-time multiplier at a
            # known rate, so pick the penalty (= dual step) that holds
            # that loop at a fixed gain instead of a fixed weight
            s = x_new[:-1] + x_new[1:]
            s_inv = float(np.sum(1.0 / (mult.rho_cons * s * s)))
            rho_t = min(max(cfg.time_gain / s_inv, cfg.rho_time), cfg.penalty_max)
            if rho_t != mult.rho_time:
                mult = replace(mult, rho_time=rho_t)
        t_new = update_t(x_new, mult, tau, road, time_floor=cfg.time_floor)
        new_traj = Trajectory(x_new, t_new)
        mult = update_multipliers(mult, new_traj, tau, road)
        time_res, cons = residuals(new_traj, tau, road)
        if not enforce_time:
            time_res = 0.0
        res_norm = math.sqrt(time_res * time_res + float(np.dot(cons, cons)))
        delta = float(
            np.linalg.norm(new_traj.x - traj.x) + np.linalg.norm(new_traj.t - traj.t)
        )
        history.append(res_norm)
        if best is None or res_norm <= best[0]:
            best = (res_norm, new_traj.copy(), iterations)
        traj = new_traj
        if delta <= cfg.eps_step and res_norm <= cfg.eps_res:
            converged = True
            break
        flip_cons |= np.sign(cons) * sign_cons < 0
        sign_cons = np.sign(cons)
        if iterations % cfg.penalty_check == 0:
            abs_cons = np.abs(cons)
            above = abs_cons > res_floor
            lagging = above & ~flip_cons & (abs_cons > cfg.penalty_shrink * check_cons)
            rho_cons = np.where(
                lagging,
                np.minimum(mult.rho_cons * cfg.penalty_growth, cfg.penalty_max),
                np.where(
                    above & flip_cons,
                    np.maximum(mult.rho_cons / cfg.penalty_growth, cfg.rho_cons),
                    mult.rho_cons,
                ),
            )
            if np.any(rho_cons != mult.rho_cons):
                mult = replace(mult, rho_cons=rho_cons)
            check_cons = abs_cons
            flip_cons = np.zeros(n, dtype=bool)
    if not converged and best is not None:
        traj = best[1]
        time_res, cons = residuals(traj, tau, road)
        if not enforce_time:
            time_res = 0.0
    return SolveResult(
        traj=traj,
        energy=total_energy(params, road, traj.x),
        iterations=iterations,
        converged=converged,
        residual_history=history,
        time_residual=time_res,
        cons_residual_norm=float(np.linalg.norm(cons)),
        multipliers=mult,
    )


@dataclass
class OracleResult:
    x: np.ndarray
    energy: float
    trip_time: float


def _sparse_min_table(values: np.ndarray) -> list[np.ndarray]:
    tables = [values]
    half = 1
    while 2 * half <= values.size:
        prev = tables[-1]
        tables.append(np.minimum(prev[: prev.size - half], prev[half:]))
        half *= 2
    return tables


def _range_min(tables: list[np.ndarray], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Minimum of the table values over [lo, hi) for each query (hi > lo)."""
    span = hi - lo
    levels = np.floor(np.log2(span)).astype(int)
    out = np.empty(lo.size)
    for lev in np.unique(levels):
        mask = levels == lev
        width = 1 << int(lev)
        tab = tables[int(lev)]
        out[mask] = np.minimum(tab[lo[mask]], tab[hi[mask] - width])
    return out


def _side_tensors(
    grids: list[np.ndarray], tabs: list[tuple[np.ndarray, np.ndarray]]
) -> tuple[np.ndarray, np.ndarray]:
    shape = tuple(g.size for g in grids)
    t = np.zeros(shape)
    e = np.zeros(shape)
    for j, (t_tab, e_tab) in enumerate(tabs):
        idx = (np.newaxis,) * j + (slice(None), slice(None)) + (np.newaxis,) * (
            len(grids) - j - 2
        )
        t = t + t_tab[idx]
        e = e + e_tab[idx]
    return t, e


def brute_force_oracle(
    params: VehicleParams,
    road: RoadProfile,
    tau: float,
    bounds: SpeedBounds,
    grid_step: float = 0.25,
    time_tol: float = 0.5,
    max_segments: int = 6,
) -> OracleResult:
    """Exhaustive grid search for the cheapest near-on-time trajectory.

    Boundary speeds are enumerated on ``grid_step`` lattices anchored at
    the lower bounds; a trajectory is admissible when its physical trip
    time lies within ``time_tol`` of ``tau``.  Exact over the grid (the
    meet-in-the-middle split changes nothing about which trajectories
    are considered), deterministic, and intended for few-segment roads
    only -- cost grows with grid^(segments/2 + 1).
    """
    n = road.n_segments
    if n > max_segments:
        raise ValueError(f"oracle limited to {max_segments} segments, road has {n}")
    grids = []
    for j in range(n + 1):
        g = np.arange(bounds.lower[j], bounds.upper[j] + 1e-9, grid_step)
        if g.size == 0:
            raise NoFeasiblePointError(f"empty speed grid at boundary {j}")
        grids.append(g)
    length = road.segment_length
    tabs = []
    for i, seg in enumerate(road.segments):
        gu, gv = grids[i], grids[i + 1]
        t_tab = np.empty((gu.size, gv.size))
        e_tab = np.empty((gu.size, gv.size))
        for a_idx, xu in enumerate(gu):
            for b_idx, xv in enumerate(gv):
                s = xu + xv
                if s <= 0:
                    t_tab[a_idx, b_idx] = np.inf
                    e_tab[a_idx, b_idx] = np.inf
                    continue
                t_tab[a_idx, b_idx] = 2.0 * length / s
                accel = (xv * xv - xu * xu) / (2.0 * length)
                e_tab[a_idx, b_idx] = soc_change(params, seg, float(xu), accel)
        tabs.append((t_tab, e_tab))
    split = (n + 1) // 2
    left_t, left_e = _side_tensors(grids[: split + 1], tabs[:split])
    right_t, right_e = _side_tensors(grids[split:], tabs[split:])
    best_energy = np.inf
    best = None
    for j in range(grids[split].size):
        a_t = left_t[..., j].ravel()
        a_e = left_e[..., j].ravel()
        b_t = right_t[j].ravel()
        b_e = right_e[j].ravel()
        order = np.argsort(b_t, kind="stable")
        bt_sorted = b_t[order]
        be_sorted = b_e[order]
        tables = _sparse_min_table(be_sorted)
        lo = np.searchsorted(bt_sorted, tau - time_tol - a_t, side="left")
        hi = np.searchsorted(bt_sorted, tau + time_tol - a_t, side="right")
        valid = (hi > lo) & np.isfinite(a_t)
        if not np.any(valid):
            continue
        win_min = np.full(a_t.size, np.inf)
        win_min[valid] = _range_min(tables, lo[valid], hi[valid])
        cand = a_e + win_min
        cand[~valid] = np.inf
        a_best = int(np.argmin(cand))
        if cand[a_best] < best_energy:
            window = slice(lo[a_best], hi[a_best])
            b_local = int(np.argmin(be_sorted[window])) + lo[a_best]
            best_energy = float(cand[a_best])
            best = (j, a_best, int(order[b_local]))
    if best is None or not np.isfinite(best_energy):
        raise NoFeasiblePointError(
            f"no grid trajectory within {time_tol} s of the {tau} s target"
        )
    j, a_flat, b_flat = best
    left_shape = tuple(g.size for g in grids[: split + 1])[:-1]
    right_shape = tuple(g.size for g in grids[split:])[1:]
    a_idx = np.unravel_index(a_flat, left_shape) if left_shape else ()
    b_idx = np.unravel_index(b_flat, right_shape) if right_shape else ()
    indices = list(a_idx) + [j] + list(b_idx)
    x = np.array([grids[k][indices[k]] for k in range(n + 1)])
    trip = sum(
        2.0 * length / (x[i] + x[i + 1]) for i in range(n)
    )
    return OracleResult(x=x, energy=total_energy(params, road, x), trip_time=float(trip))
