"""Heterogeneous-fleet scheduling with a receding horizon, plus a
search-and-rescue simulator and benchmark harness."""

from .domain import (
    AGV,
    BUILTIN_CLASSES,
    DEFAULT_HANDLING_TIME,
    DRONE,
    GROUND_UNIT,
    HELICOPTER,
    Agent,
    AgentClass,
    Assignment,
    CapabilityVector,
    NotDispatchable,
    Task,
    TaskKind,
    Terrain,
    WorldGeometry,
    capacity_for,
    is_dispatchable,
    trip_duration,
)
from .heuristic import (
    ClassLoadSpec,
    HeuristicValue,
    InfeasibleHeuristic,
    LoadBalanceProblem,
    NoFeasibleTerrain,
    build_lp,
    estimate_cost_to_go,
    load_balance_from_tasks,
    trip_time_lower_bound,
)
from .planner import (
    GreedyPlanner,
    NoDispatchablePair,
    PlannerConfig,
    PlanningSnapshot,
    PlanNode,
    PlanResult,
    RecedingHorizonPlanner,
    candidate_tasks,
    commit_prefix,
    expand,
    greedy_assign,
    plan,
    select_agent,
)

__version__ = "0.1.0"
