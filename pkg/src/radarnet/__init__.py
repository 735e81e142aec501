"""Decentralized multi-radar multi-target allocation.

Radar agents run a two-round bundle auction with consensus to share up
to two radars per target, maintain Kalman tracks on what they win, and
are benchmarked against an exact centralized solver of the same
constrained allocation problem.
"""

from .cbba import (
    AgentState,
    BeliefState,
    ConsensusMessage,
    Role,
    UtilityTable,
    bid_phase,
    consensus_phase,
    dmg_bid,
    extract_allocation,
    run_to_fixed_point,
    tick,
)
from .cop import (
    Allocation,
    ContractError,
    CopInstance,
    EmptyInstance,
    SolveResult,
    Violation,
    build_instance,
    load_instance,
    objective,
    pair_utility,
    save_instance,
    solve_exact,
    validate,
)
from .geometry import (
    Cov2,
    CovEllipse,
    GeometryError,
    Vec2,
    ellipse_area,
    ellipse_intersection_area,
    polar_cov_to_cartesian,
)
from .simkit import (
    MetricsRecord,
    Placement,
    ScenarioKind,
    ScenarioSpec,
    World,
    aggregate,
    generate_scenario,
    run_episode,
    step_world,
)
from .tracking import (
    NotVisible,
    PolarMeasurement,
    RadarConfig,
    TrackState,
    as_load,
    init_track,
    kf_predict,
    kf_update,
    measurement_noise,
    predicted_ellipse,
    synthesize_measurement,
)

__version__ = "0.1.0"
