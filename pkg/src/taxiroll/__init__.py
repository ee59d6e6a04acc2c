"""Multi-agent taxi dispatch simulation with rollout planning and LLM-backed
base policies."""

from .assignment import Assignment, auction_assign
from .demand import (
    CeFutureSampler,
    DemandModel,
    Request,
    Scenario,
    ce_future_sampler,
    load_scenario,
    sample_scenario,
    save_scenario,
)
from .fleet import (
    AgentAction,
    AgentStatus,
    FleetState,
    JointAction,
    Policy,
    ReplayPolicy,
    SimResult,
    initial_fleet,
    local_controls,
    simulate,
    stage_cost,
    step,
)
from .policies import (
    ExternalPolicy,
    GreedyPolicy,
    IaRaPolicy,
    StayPolicy,
    external_policy,
    greedy_policy,
    ia_ra_policy,
)
from .roadgraph import (
    UNREACHABLE,
    PathTable,
    RoadGraph,
    all_pairs,
    dump_map,
    load_map,
    neighbors,
    shortest_path,
)
from .rollout import (
    QEstimate,
    RolloutConfig,
    RolloutPolicy,
    online_play_decide,
    q_estimate,
    rollout_decide,
)

__version__ = "0.1.0"

__all__ = [
    "AgentAction",
    "AgentStatus",
    "Assignment",
    "CeFutureSampler",
    "DemandModel",
    "ExternalPolicy",
    "FleetState",
    "GreedyPolicy",
    "IaRaPolicy",
    "JointAction",
    "PathTable",
    "Policy",
    "QEstimate",
    "ReplayPolicy",
    "Request",
    "RoadGraph",
    "RolloutConfig",
    "RolloutPolicy",
    "Scenario",
    "SimResult",
    "StayPolicy",
    "UNREACHABLE",
    "all_pairs",
    "auction_assign",
    "ce_future_sampler",
    "dump_map",
    "external_policy",
    "greedy_policy",
    "ia_ra_policy",
    "initial_fleet",
    "load_map",
    "load_scenario",
    "local_controls",
    "neighbors",
    "online_play_decide",
    "q_estimate",
    "rollout_decide",
    "sample_scenario",
    "save_scenario",
    "shortest_path",
    "simulate",
    "stage_cost",
    "step",
]
