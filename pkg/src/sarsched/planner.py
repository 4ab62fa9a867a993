"""Receding-horizon branch-and-bound scheduler and the greedy baseline.

Each search node is a partial schedule; children add one assignment for the
single agent that can finish a task earliest, which removes agent-order
symmetries. Nodes are explored best-first by their relaxation bound and
pruned against the incumbent leaf. Ties prefer deeper nodes so bound
plateaus dive to a leaf instead of breadth-filling the frontier.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .domain import (
    DEFAULT_HANDLING_TIME,
    Agent,
    AgentClass,
    Assignment,
    Task,
    WorldGeometry,
    capacity_for,
    distance,
    is_dispatchable,
    trip_duration,
)
from .heuristic import estimate_cost_to_go, load_balance_from_tasks

EFFORT_EPS = 1e-9


class NoDispatchablePair(Exception):
    """No agent in the snapshot can serve any remaining task."""


@dataclass(frozen=True)
class PlannerConfig:
    """Search depth, committed prefix length and exploration limits."""

    planning_depth: int
    commit_count: int | None = None  # default: max(1, depth // 3)
    node_budget: int = 50_000
    replan_interval: float = 5.0
    tie_break: str = "depth_lex"
    prune: bool = True

    def __post_init__(self) -> None:
        if self.planning_depth < 1:
            raise ValueError("planning_depth must be >= 1")
        if self.node_budget < 1:
            raise ValueError("node_budget must be >= 1")
        if not 1 <= self.effective_commit() <= self.planning_depth:
            raise ValueError("commit_count must lie in [1, planning_depth]")

    def effective_commit(self) -> int:
        if self.commit_count is None:
            return max(1, self.planning_depth // 3)
        return self.commit_count


@dataclass(frozen=True)
class PlanningSnapshot:
    """Tasks and fleet state handed to a planner at one replan instant."""

    now: float
    tasks: tuple[Task, ...]
    agents: tuple[Agent, ...]
    classes: Mapping[str, AgentClass]
    geometry: WorldGeometry
    handling_time: float = DEFAULT_HANDLING_TIME
    release_times: Mapping[str, float] = field(default_factory=dict)

    def free_time(self, agent: Agent) -> float:
        return max(agent.busy_until, self.now)

    def release_of(self, task: Task) -> float:
        return self.release_times.get(task.task_id, self.now)


@dataclass
class PlanNode:
    """Partial schedule: one assignment per tree edge back to the root."""

    parent: "PlanNode | None"
    new_assignment: Assignment | None
    agent_free_times: dict[str, float]
    remaining_efforts: dict[str, float]
    depth: int
    bound_J: float

    def schedule(self) -> tuple[Assignment, ...]:
        steps: list[Assignment] = []
        node: PlanNode | None = self
        while node is not None and node.new_assignment is not None:
            steps.append(node.new_assignment)
            node = node.parent
        return tuple(reversed(steps))


@dataclass(frozen=True)
class PlanResult:
    schedule: tuple[Assignment, ...]
    bound_J: float
    nodes_expanded: int
    optimal_within_depth: bool


class _Search:
    """Per-snapshot caches shared by the planner operations."""

    def __init__(self, snapshot: PlanningSnapshot):
        self.snapshot = snapshot
        self.agents = tuple(sorted(snapshot.agents, key=lambda a: a.agent_id))
        self.tasks = {t.task_id: t for t in snapshot.tasks}
        self.class_of = {a.agent_id: snapshot.classes[a.class_id] for a in self.agents}
        self.trip: dict[tuple[str, str], float] = {}
        self.cap: dict[tuple[str, str], float] = {}
        for agent in self.agents:
            cls = self.class_of[agent.agent_id]
            for task in snapshot.tasks:
                if is_dispatchable(cls, task):
                    key = (agent.agent_id, task.task_id)
                    self.trip[key] = trip_duration(
                        cls, task, snapshot.geometry, snapshot.handling_time
                    )
                    self.cap[key] = capacity_for(cls, task.kind)
        self._bound_memo: dict[tuple, float] = {}

    def root(self) -> PlanNode:
        free = {a.agent_id: self.snapshot.free_time(a) for a in self.agents}
        remaining = {
            t.task_id: t.remaining_effort
            for t in self.snapshot.tasks
            if t.remaining_effort > EFFORT_EPS
        }
        node = PlanNode(None, None, free, remaining, 0, 0.0)
        node.bound_J = self.bound(node)
        return node

    def start_time(self, node: PlanNode, agent_id: str, task_id: str) -> float:
        release = self.snapshot.release_times.get(task_id, self.snapshot.now)
        return max(node.agent_free_times[agent_id], release)

    def live_pairs(self, node: PlanNode) -> list[tuple[str, str]]:
        return [
            (agent_id, task_id)
            for (agent_id, task_id) in self.trip
            if node.remaining_efforts.get(task_id, 0.0) > EFFORT_EPS
        ]

    def select_agent(self, node: PlanNode) -> str:
        best: tuple[float, str, str] | None = None
        for agent_id, task_id in self.live_pairs(node):
            completion = self.start_time(node, agent_id, task_id) + self.trip[(agent_id, task_id)]
            key = (completion, agent_id, task_id)
            if best is None or key < best:
                best = key
        if best is None:
            raise NoDispatchablePair("no agent can serve any remaining task")
        return best[1]

    def candidate_tasks(self, node: PlanNode, agent_id: str) -> list[Task]:
        live = [
            task_id
            for (aid, task_id) in self.live_pairs(node)
            if aid == agent_id
        ]
        horizon = min(
            self.start_time(node, agent_id, t) + self.trip[(agent_id, t)] for t in live
        )
        chosen = [
            t for t in live if self.start_time(node, agent_id, t) <= horizon + 1e-12
        ]
        return [self.tasks[t] for t in sorted(chosen)]

    def child(self, node: PlanNode, agent_id: str, task: Task) -> PlanNode:
        start = self.start_time(node, agent_id, task.task_id)
        duration = self.trip[(agent_id, task.task_id)]
        contribution = min(
            self.cap[(agent_id, task.task_id)],
            node.remaining_efforts[task.task_id],
        )
        assignment = Assignment(agent_id, task.task_id, contribution, start, duration)
        free = dict(node.agent_free_times)
        free[agent_id] = start + duration
        remaining = dict(node.remaining_efforts)
        left = remaining[task.task_id] - contribution
        if left > EFFORT_EPS:
            remaining[task.task_id] = left
        else:
            del remaining[task.task_id]
        return PlanNode(node, assignment, free, remaining, node.depth + 1, 0.0)

    def bound(self, node: PlanNode) -> float:
        if not node.remaining_efforts:
            return max(node.agent_free_times.values(), default=0.0)
        key = (
            tuple(sorted(node.agent_free_times.items())),
            tuple(sorted(node.remaining_efforts.items())),
        )
        cached = self._bound_memo.get(key)
        if cached is not None:
            return cached
        live = [
            self.tasks[task_id] for task_id in sorted(node.remaining_efforts)
        ]
        problem = load_balance_from_tasks(
            live,
            self.agents,
            self.snapshot.classes,
            self.snapshot.geometry,
            self.snapshot.handling_time,
            free_times=node.agent_free_times,
            merge_equivalent=True,
            efforts=node.remaining_efforts,
        )
        value = estimate_cost_to_go(problem).makespan_bound
        self._bound_memo[key] = value
        return value


def select_agent(node: PlanNode, snapshot: PlanningSnapshot) -> str:
    """Agent able to finish some remaining task earliest (ties: ids)."""
    return _Search(snapshot).select_agent(node)


def candidate_tasks(node: PlanNode, agent_id: str, snapshot: PlanningSnapshot) -> list[Task]:
    """Tasks the chosen agent could start before its earliest one finishes."""
    return _Search(snapshot).candidate_tasks(node, agent_id)


def expand(
    node: PlanNode,
    snapshot: PlanningSnapshot,
    heuristic: Callable[[PlanNode], float] | None = None,
) -> list[PlanNode]:
    """All children of a node: one new assignment per candidate task."""
    search = _Search(snapshot)
    evaluate = heuristic or search.bound
    agent_id = search.select_agent(node)
    children = []
    for task in search.candidate_tasks(node, agent_id):
        child = search.child(node, agent_id, task)
        child.bound_J = evaluate(child)
        children.append(child)
    return children


def plan(snapshot: PlanningSnapshot, config: PlannerConfig) -> PlanResult:
    """Best-first branch-and-bound up to the configured depth.

    Child bounds are evaluated lazily: children inherit the parent bound as
    their queue key and get their own relaxation solved only when popped.
    Bounds never decrease down a path, so the first leaf popped with its true
    bound is optimal and everything still queued can be pruned against it.
    """
    search = _Search(snapshot)
    root = search.root()
    if not root.remaining_efforts:
        return PlanResult((), root.bound_J, 0, True)

    counter = itertools.count()
    heap: list[tuple[float, int, int, bool, PlanNode]] = []
    heapq.heappush(heap, (root.bound_J, 0, next(counter), True, root))
    incumbent: PlanNode | None = None
    best_partial: tuple[float, int, PlanNode] | None = None
    expanded = 0
    budget_hit = False

    while heap:
        bound, neg_depth, seq, evaluated, node = heapq.heappop(heap)
        if config.prune and incumbent is not None and bound >= incumbent.bound_J:
            break  # heap is ordered: everything left is prunable
        if not evaluated:
            node.bound_J = search.bound(node)
            if config.prune and incumbent is not None and node.bound_J >= incumbent.bound_J:
                continue
            heapq.heappush(heap, (node.bound_J, neg_depth, seq, True, node))
            continue
        if best_partial is None or (node.bound_J, seq) < (best_partial[0], best_partial[1]):
            best_partial = (node.bound_J, seq, node)
        if not node.remaining_efforts or node.depth >= config.planning_depth:
            if incumbent is None or node.bound_J < incumbent.bound_J:
                incumbent = node
            continue
        if expanded >= config.node_budget:
            budget_hit = True
            break
        expanded += 1
        agent_id = search.select_agent(node)
        for task in search.candidate_tasks(node, agent_id):
            child = search.child(node, agent_id, task)
            child.bound_J = node.bound_J  # lower bound until evaluated
            heapq.heappush(
                heap, (node.bound_J, -child.depth, next(counter), False, child)
            )

    chosen = incumbent if incumbent is not None else (best_partial[2] if best_partial else root)
    return PlanResult(
        schedule=chosen.schedule(),
        bound_J=chosen.bound_J,
        nodes_expanded=expanded,
        optimal_within_depth=not budget_hit,
    )


def commit_prefix(result: PlanResult, config: PlannerConfig) -> list[Assignment]:
    """The leading assignments that get dispatched before the next replan."""
    return list(result.schedule[: config.effective_commit()])


def greedy_assign(snapshot: PlanningSnapshot) -> list[Assignment]:
    """One-step baseline: every idle agent takes its nearest feasible task."""
    now = snapshot.now
    remaining = {
        t.task_id: t.remaining_effort for t in snapshot.tasks if t.remaining_effort > EFFORT_EPS
    }
    tasks = {t.task_id: t for t in snapshot.tasks}
    assignments: list[Assignment] = []
    for agent in sorted(snapshot.agents, key=lambda a: a.agent_id):
        if snapshot.free_time(agent) > now + 1e-9:
            continue
        cls = snapshot.classes[agent.class_id]
        best: tuple[float, str] | None = None
        for task_id, effort in remaining.items():
            if effort <= EFFORT_EPS or not is_dispatchable(cls, tasks[task_id]):
                continue
            key = (distance(agent.position, tasks[task_id].location), task_id)
            if best is None or key < best:
                best = key
        if best is None:
            continue
        task = tasks[best[1]]
        contribution = min(capacity_for(cls, task.kind), remaining[task.task_id])
        duration = trip_duration(cls, task, snapshot.geometry, snapshot.handling_time)
        assignments.append(
            Assignment(agent.agent_id, task.task_id, contribution, now, duration)
        )
        left = remaining[task.task_id] - contribution
        if left > EFFORT_EPS:
            remaining[task.task_id] = left
        else:
            del remaining[task.task_id]
    return assignments


class GreedyPlanner:
    """Nearest-task dispatcher for idle agents."""

    def __init__(self, replan_interval: float = 5.0):
        self.label = "greedy"
        self.replan_interval = replan_interval

    def propose(self, snapshot: PlanningSnapshot) -> list[Assignment]:
        return greedy_assign(snapshot)


class RecedingHorizonPlanner:
    """Plans a fixed-depth schedule and commits only its leading prefix."""

    def __init__(self, config: PlannerConfig):
        self.config = config
        self.label = f"rhp{config.planning_depth}"
        self.replan_interval = config.replan_interval

    def propose(self, snapshot: PlanningSnapshot) -> list[Assignment]:
        return commit_prefix(plan(snapshot, self.config), self.config)
