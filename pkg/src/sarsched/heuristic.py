"""Load-balancing LP that lower-bounds the makespan of the remaining work.

The relaxation distributes each task's remaining effort over agent classes
(fractional trips allowed), then over class members, and minimizes the latest
finishing time. Trip times enter as per-kind lower bounds, so the optimum
never exceeds the makespan of any executable completion and is safe to use
for pruning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import lp
from .domain import (
    DEFAULT_HANDLING_TIME,
    Agent,
    AgentClass,
    Task,
    TaskKind,
    WorldGeometry,
    capacity_for,
    distance,
    is_dispatchable,
    trip_duration,
)


class NoFeasibleTerrain(Exception):
    """The class cannot reach any current target of the requested kind."""


class InfeasibleHeuristic(Exception):
    """No combination of classes can cover some task (unservable world)."""


@dataclass(frozen=True)
class ClassLoadSpec:
    """Per-task capacity and trip-time lower bound of one agent class."""

    class_id: str
    capacity: Mapping[str, float]  # task_id -> per-trip contribution
    trip_time: Mapping[str, float]  # task_id -> time lower bound


@dataclass(frozen=True)
class LoadBalanceProblem:
    tasks: tuple[tuple[str, float], ...]  # (task_id, remaining effort)
    classes: tuple[ClassLoadSpec, ...]
    agents: tuple[tuple[str, str, float], ...]  # (agent_id, class_id, free time)

    def validate(self) -> None:
        for task_id, effort in self.tasks:
            if effort <= 0:
                raise ValueError(f"task {task_id} has non-positive effort")
        for spec in self.classes:
            for task_id, _ in self.tasks:
                if spec.capacity.get(task_id, 0.0) > 0 and spec.trip_time.get(task_id, 0.0) <= 0:
                    raise ValueError(
                        f"class {spec.class_id} has capacity but no trip time for {task_id}"
                    )
        known = {spec.class_id for spec in self.classes}
        for agent_id, class_id, free in self.agents:
            if class_id not in known:
                raise ValueError(f"agent {agent_id} references unknown class {class_id}")
            if free < 0:
                raise ValueError(f"agent {agent_id} has negative free time")


@dataclass(frozen=True)
class HeuristicValue:
    makespan_bound: float
    per_agent_load: dict[str, dict[str, float]]  # agent -> task -> trips
    per_class_load: dict[tuple[str, str], float]  # (class, task) -> trips


def trip_time_lower_bound(
    agent_class: AgentClass,
    kind: TaskKind,
    tasks: Sequence[Task],
    geometry: WorldGeometry,
    handling_time: float = DEFAULT_HANDLING_TIME,
) -> float:
    """Optimistic round-trip time for this class over current targets of a kind.

    Uses the nearest target of the kind and the fastest terrain speed among
    terrains holding such targets, so no actual trip can be quicker.
    """
    targets = [t for t in tasks if t.kind is kind]
    if not targets:
        raise ValueError(f"no current targets of kind {kind}")
    v_max = max(agent_class.capabilities.speed(t.terrain) for t in targets)
    if v_max <= 0:
        raise NoFeasibleTerrain(
            f"{agent_class.class_id} cannot reach any {kind.value} target"
        )
    d_min = min(distance(geometry.base_position, t.location) for t in targets)
    return 2.0 * d_min / v_max + handling_time


def load_balance_from_tasks(
    tasks: Sequence[Task],
    agents: Iterable[Agent],
    classes: Mapping[str, AgentClass],
    geometry: WorldGeometry,
    handling_time: float = DEFAULT_HANDLING_TIME,
    free_times: Mapping[str, float] | None = None,
    merge_equivalent: bool = False,
    exact_trip_times: bool = False,
    efforts: Mapping[str, float] | None = None,
) -> LoadBalanceProblem:
    """Assemble the relaxation from live tasks and fleet state.

    ``merge_equivalent`` pools tasks that share a kind and terrain into one
    entry (their LP columns are identical, so the optimum is unchanged);
    ``exact_trip_times`` swaps lower bounds for true per-task durations;
    ``efforts`` overrides per-task remaining effort without copying tasks.
    """

    def effort_of(task: Task) -> float:
        if efforts is not None and task.task_id in efforts:
            return efforts[task.task_id]
        return task.remaining_effort

    entries: list[tuple[str, float, TaskKind, object]] = []
    if merge_equivalent and not exact_trip_times:
        grouped: dict[tuple, list[Task]] = {}
        for task in tasks:
            grouped.setdefault((task.kind, task.terrain), []).append(task)
        for (kind, terrain), members in grouped.items():
            effort = sum(effort_of(t) for t in members)
            if effort > 0:
                entries.append(
                    (f"{kind.value}@{terrain.value}", effort, kind, members[0])
                )
    else:
        entries = [
            (t.task_id, effort_of(t), t.kind, t)
            for t in tasks
            if effort_of(t) > 0
        ]

    bound_cache: dict[tuple[str, TaskKind], float | None] = {}

    def kind_bound(cls: AgentClass, kind: TaskKind) -> float | None:
        key = (cls.class_id, kind)
        if key not in bound_cache:
            try:
                bound_cache[key] = trip_time_lower_bound(
                    cls, kind, tasks, geometry, handling_time
                )
            except NoFeasibleTerrain:
                bound_cache[key] = None
        return bound_cache[key]

    specs = []
    for class_id in classes:
        cls = classes[class_id]
        capacity: dict[str, float] = {}
        trip: dict[str, float] = {}
        for entry_id, _, kind, proto in entries:
            task_like: Task = proto  # representative task of the entry
            if not is_dispatchable(cls, task_like):
                capacity[entry_id] = 0.0
                trip[entry_id] = 0.0
                continue
            if exact_trip_times:
                t_time = trip_duration(cls, task_like, geometry, handling_time)
            else:
                t_time = kind_bound(cls, kind)
            if t_time is None:
                capacity[entry_id] = 0.0
                trip[entry_id] = 0.0
            else:
                capacity[entry_id] = capacity_for(cls, kind)
                trip[entry_id] = t_time
        specs.append(ClassLoadSpec(class_id, capacity, trip))

    free_times = free_times or {}
    agent_rows = tuple(
        (a.agent_id, a.class_id, float(free_times.get(a.agent_id, a.busy_until)))
        for a in agents
    )
    return LoadBalanceProblem(
        tasks=tuple((entry_id, effort) for entry_id, effort, _, _ in entries),
        classes=tuple(specs),
        agents=agent_rows,
    )


def build_lp(problem: LoadBalanceProblem) -> lp.LPStandardForm:
    """Emit the full relaxation in solver-ready form.

    Variable order: class-by-class per-task trip totals, agent-by-agent
    per-task trips, then the makespan. Rows: one effort-coverage row per
    task, one completion-time row per agent, and one consistency equality
    per (class, task) pair.
    """
    problem.validate()
    tasks = problem.tasks
    classes = problem.classes
    agents = problem.agents
    n_t, n_c, n_a = len(tasks), len(classes), len(agents)

    n_vars = n_c * n_t + n_a * n_t + 1
    s_col = n_vars - 1

    def n_col(ci: int, ti: int) -> int:
        return ci * n_t + ti

    def m_col(ai: int, ti: int) -> int:
        return n_c * n_t + ai * n_t + ti

    objective = np.zeros(n_vars)
    objective[s_col] = 1.0

    a_ub = np.zeros((n_t + n_a, n_vars))
    b_ub = np.zeros(n_t + n_a)
    for ti, (_, effort) in enumerate(tasks):
        for ci, spec in enumerate(classes):
            a_ub[ti, n_col(ci, ti)] = -spec.capacity.get(tasks[ti][0], 0.0)
        b_ub[ti] = -effort
    class_index = {spec.class_id: ci for ci, spec in enumerate(classes)}
    for ai, (_, class_id, free) in enumerate(agents):
        spec = classes[class_index[class_id]]
        row = n_t + ai
        for ti, (task_id, _) in enumerate(tasks):
            a_ub[row, m_col(ai, ti)] = spec.trip_time.get(task_id, 0.0)
        a_ub[row, s_col] = -1.0
        b_ub[row] = -free

    a_eq = np.zeros((n_c * n_t, n_vars))
    b_eq = np.zeros(n_c * n_t)
    for ci, spec in enumerate(classes):
        for ti in range(n_t):
            row = ci * n_t + ti
            for ai, (_, class_id, _) in enumerate(agents):
                if class_id == spec.class_id:
                    a_eq[row, m_col(ai, ti)] = 1.0
            a_eq[row, n_col(ci, ti)] = -1.0

    return lp.LPStandardForm(
        objective=objective,
        eq_matrix=a_eq,
        eq_rhs=b_eq,
        ub_matrix=a_ub,
        ub_rhs=b_ub,
    )


def estimate_cost_to_go(problem: LoadBalanceProblem) -> HeuristicValue:
    """Solve the relaxation and return the makespan lower bound with loads.

    Summing each class's completion-time rows collapses them into one row per
    class without changing the optimum (loads are divisible within a class),
    so the solve runs on the collapsed form and the per-agent trips are
    recovered by filling every member up to the same level.
    """
    problem.validate()
    agents = problem.agents
    y_max = max((free for _, _, free in agents), default=0.0)
    if not problem.tasks:
        return HeuristicValue(y_max, {a: {} for a, _, _ in agents}, {})

    members: dict[str, list[tuple[str, float]]] = {}
    for agent_id, class_id, free in agents:
        members.setdefault(class_id, []).append((agent_id, free))
    active = [spec for spec in problem.classes if spec.class_id in members]

    task_ids = [task_id for task_id, _ in problem.tasks]
    for task_id, _ in problem.tasks:
        if not any(spec.capacity.get(task_id, 0.0) > 0 for spec in active):
            raise InfeasibleHeuristic(f"no class with members can serve {task_id}")

    n_t, n_c = len(task_ids), len(active)
    n_vars = n_c * n_t + 1
    s_col = n_vars - 1
    objective = np.zeros(n_vars)
    objective[s_col] = 1.0

    a_ub = np.zeros((n_t + n_c + 1, n_vars))
    b_ub = np.zeros(n_t + n_c + 1)
    for ti, (task_id, effort) in enumerate(problem.tasks):
        for ci, spec in enumerate(active):
            a_ub[ti, ci * n_t + ti] = -spec.capacity.get(task_id, 0.0)
        b_ub[ti] = -effort
    for ci, spec in enumerate(active):
        crew = members[spec.class_id]
        row = n_t + ci
        for ti, task_id in enumerate(task_ids):
            a_ub[row, ci * n_t + ti] = spec.trip_time.get(task_id, 0.0)
        a_ub[row, s_col] = -float(len(crew))
        b_ub[row] = -sum(free for _, free in crew)
    a_ub[-1, s_col] = -1.0
    b_ub[-1] = -y_max

    result = lp.solve(lp.LPStandardForm(objective=objective, ub_matrix=a_ub, ub_rhs=b_ub))
    if result.status is not lp.LPStatus.OPTIMAL:
        raise InfeasibleHeuristic(f"relaxation reported {result.status.value}")
    x = result.solution
    s = max(float(x[s_col]), y_max)

    per_class: dict[tuple[str, str], float] = {}
    per_agent: dict[str, dict[str, float]] = {a: {} for a, _, _ in agents}
    for ci, spec in enumerate(active):
        crew = members[spec.class_id]
        trips = {task_ids[ti]: max(0.0, float(x[ci * n_t + ti])) for ti in range(n_t)}
        for task_id, value in trips.items():
            per_class[(spec.class_id, task_id)] = value
        load = sum(spec.trip_time.get(t, 0.0) * trips[t] for t in task_ids)
        headroom = sum(max(0.0, s - free) for _, free in crew)
        if load > 1e-12 and headroom > 0:
            # Fill members up to the common level s: agent j takes the
            # (s - y_j) / headroom share of every task's trips.
            for agent_id, free in crew:
                share = max(0.0, s - free) / headroom
                for task_id in task_ids:
                    if trips[task_id] > 0:
                        per_agent[agent_id][task_id] = trips[task_id] * share
        else:
            # Zero time-load: park any zero-duration trips on the first member.
            first = crew[0][0]
            for task_id in task_ids:
                if trips[task_id] > 0:
                    per_agent[first][task_id] = trips[task_id]
    for spec in problem.classes:
        if spec.class_id not in members:
            for task_id in task_ids:
                per_class[(spec.class_id, task_id)] = 0.0
    return HeuristicValue(s, per_agent, per_class)
