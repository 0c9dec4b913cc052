"""Energy-minimal speed planning for battery-electric heavy trucks.

Plans speed trajectories over hilly roads by alternating optimisation of
an augmented Lagrangian, executes them receding-horizon with stochastic
traffic constraints, and projects battery life under daily duty cycles.
"""

from .aging import (
    AgingParams,
    AgingState,
    CycleStats,
    DailyDrive,
    DayConfig,
    LifeProjection,
    RangeExceededError,
    SocTrace,
    UndefinedStatsError,
    capacity_fade,
    daily_drive_from_route,
    drive_trace,
    fading_rate,
    fit_rate_params,
    project_life,
    simulate_charge,
    simulate_day,
    soc_stats,
)
from .dynamics import (
    DegenerateSegmentError,
    ForceCase,
    GammaCoeffs,
    KinematicsError,
    RoadSegment,
    SegmentCoeffs,
    VehicleParams,
    accel_for_speeds,
    classify_case,
    gamma_coeffs,
    segment_coeffs,
    segment_time,
    soc_change,
    soc_change_parts,
    state_transition,
    track_force,
)
from .mpc import MpcConfig, RouteResult, RouteState, mpc_step, run_route, window_time_budget
from .objective import (
    EtaCoeffs,
    MultiplierState,
    SpeedBounds,
    Trajectory,
    augmented_lagrangian,
    eta_coeffs,
    grad_x,
    residuals,
    total_energy,
)
from .roads import (
    RoadFormatError,
    RoadProfile,
    load_road,
    max_abs_slope,
    ramp_road,
    road_from_altitudes,
    save_road,
    synth_road,
)
from .scenarios import (
    ComparisonReport,
    ControllerMetrics,
    FingerprintMismatchError,
    InfeasibleScenarioError,
    ScenarioConfig,
    cc_baseline,
    compare,
    metrics_from_route,
    scenario_fingerprint,
)
from .solver import (
    NoFeasiblePointError,
    OracleResult,
    SolveResult,
    SolverConfig,
    brute_force_oracle,
    solve,
    update_multipliers,
    update_t,
    update_x,
)
from .traffic import (
    HEAVY_TRAFFIC,
    LIGHT_TRAFFIC,
    NORMAL_TRAFFIC,
    CollisionError,
    TrafficConfig,
    TrafficTrace,
    bounds_for_window,
    generate_trace,
    headway_speed_bound,
    update_gap,
)

__version__ = "0.1.0"
