"""Demand pooling and electric fleet routing toolkit for on-demand urban air mobility.

Two solver stages: a beam search that pools ride demands into shared flights
under capacity, deadline and per-class waiting constraints, and a variable
neighborhood search that routes an electric fleet over the consolidated
flight requests while planning recharges. Exact reference solvers certify
both stages on small inputs, seeded generators reproduce the synthetic
benchmark families, and an online session accepts or rejects new demands
against a live schedule.
"""

__version__ = "0.1.0"

from .model import (
    Aircraft,
    ArrivalProfile,
    BatteryParams,
    ChargePlan,
    Demand,
    DemandClass,
    FlightRequest,
    Network,
    PoolingConfig,
    PoolingSolution,
    RoutingConfig,
    RoutingSolution,
    SocPoint,
    StratificationError,
    StructuralError,
    UnservableDemandError,
    Vertiport,
    VnsConfig,
    Violation,
    ZERO_CHARGE,
    demand_servable,
    validate_pooling,
)
from .pooling import BeamState, beam_search, extend_incremental, initial_state, to_requests
from .routing import (
    RoutingInstance,
    SearchObjective,
    evaluate,
    simulate_soc,
    stratified_config,
    validate_routing,
)
from .vns import (
    VnsResult,
    neighborhood_recharge,
    neighborhood_rotate,
    neighborhood_shift,
    neighborhood_swap,
    shake,
    uam_vns,
    vnd,
)
from .oracles import OracleLimits, OracleRefusal, exact_pooling, exact_routing
from .instgen import (
    DemandModel,
    InfraModel,
    gen_demands,
    gen_network,
    gen_requests,
    gen_routing_instance,
    seed_stream,
)
from .analytics import (
    FairnessRecord,
    PoolingMetrics,
    RoutingMetrics,
    fairness_experiment,
    fairness_records,
    pooling_metrics,
    routing_metrics,
    sweep_qos,
)
from .online import (
    PlacedDemand,
    ProposeResult,
    Session,
    SessionError,
    build_session,
    checkpoint_report,
    propose,
    session_digest,
    session_from_payload,
    session_to_payload,
)

__all__ = [
    "__version__",
    "Aircraft",
    "ArrivalProfile",
    "BatteryParams",
    "BeamState",
    "ChargePlan",
    "Demand",
    "DemandClass",
    "DemandModel",
    "FairnessRecord",
    "FlightRequest",
    "InfraModel",
    "Network",
    "OracleLimits",
    "OracleRefusal",
    "PlacedDemand",
    "PoolingConfig",
    "PoolingMetrics",
    "PoolingSolution",
    "ProposeResult",
    "RoutingConfig",
    "RoutingInstance",
    "RoutingMetrics",
    "RoutingSolution",
    "SearchObjective",
    "Session",
    "SessionError",
    "SocPoint",
    "StratificationError",
    "StructuralError",
    "UnservableDemandError",
    "Vertiport",
    "Violation",
    "VnsConfig",
    "VnsResult",
    "ZERO_CHARGE",
    "beam_search",
    "build_session",
    "checkpoint_report",
    "demand_servable",
    "evaluate",
    "exact_pooling",
    "exact_routing",
    "extend_incremental",
    "fairness_experiment",
    "fairness_records",
    "gen_demands",
    "gen_network",
    "gen_requests",
    "gen_routing_instance",
    "initial_state",
    "neighborhood_recharge",
    "neighborhood_rotate",
    "neighborhood_shift",
    "neighborhood_swap",
    "pooling_metrics",
    "propose",
    "routing_metrics",
    "seed_stream",
    "session_digest",
    "session_from_payload",
    "session_to_payload",
    "shake",
    "simulate_soc",
    "stratified_config",
    "sweep_qos",
    "to_requests",
    "uam_vns",
    "validate_pooling",
    "validate_routing",
    "vnd",
]
