"""Deterministic discrete-time SaR world with a planner-in-the-loop driver.

Fires grow and spread, victims start hidden, and agents execute committed
assignments as pick-and-place trips (base -> fire for water, victim ->
hospital for rescues, cell center for surveys). All randomness flows from
one seeded generator, so identical (scenario, planner, seed) inputs replay
byte-for-byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .domain import (
    Agent,
    Assignment,
    Point,
    Task,
    TaskKind,
    Terrain,
    capacity_for,
    distance,
)
from .planner import PlanningSnapshot
from .scenario import ScenarioConfig

HEALTH_EPS = 1e-9
TIME_EPS = 1e-9


class VictimStatus(Enum):
    HIDDEN = "hidden"
    IDENTIFIED = "identified"
    CARRIED = "carried"
    RESCUED = "rescued"


@dataclass
class Fire:
    """A burning circle; radius and water demand scale with health."""

    fire_id: str
    position: Point
    health: float  # percent in (0, 100]
    growth_rate: float
    water_per_health: float
    spread_armed: bool = True

    def water_needed(self) -> float:
        return max(1.0, math.ceil(round(self.health * self.water_per_health, 9)))


@dataclass
class Victim:
    victim_id: str
    position: Point
    status: VictimStatus = VictimStatus.HIDDEN


@dataclass
class Leg:
    target: Point
    service: float
    action: str  # load_water | deliver | pickup | dropoff | survey


@dataclass
class Mission:
    """One committed assignment being executed as a waypoint sequence."""

    task_id: str
    kind: TaskKind
    terrain: Terrain
    target: Point
    contribution: float
    fire_id: str | None = None
    cell: tuple[int, int] | None = None
    legs: list[Leg] | None = None  # built when the mission starts
    leg_index: int = 0
    action_done: bool = False


@dataclass
class FleetUnit:
    """Mutable runtime state of one agent."""

    agent_id: str
    class_id: str
    position: Point
    water_load: float = 0.0
    carried: list[str] = field(default_factory=list)
    missions: list[Mission] = field(default_factory=list)
    service_remaining: float = 0.0

    @property
    def busy(self) -> bool:
        return bool(self.missions)


class Trace:
    """Ordered event log, optionally streamed as JSON lines."""

    def __init__(self, path: str | Path | None = None):
        self.events: list[dict] = []
        self._handle = open(path, "w") if path is not None else None

    def emit(self, time: float, event: str, subject: str, position: Point | None, payload: dict) -> None:
        record = {
            "time": time,
            "event": event,
            "subject": subject,
            "position": None if position is None else [position[0], position[1]],
            "payload": payload,
        }
        self.events.append(record)
        if self._handle is not None:
            self._handle.write(json.dumps(record, separators=(",", ":")) + "\n")

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


@dataclass
class WorldState:
    scenario: ScenarioConfig
    time: float
    fires: list[Fire]
    victims: list[Victim]
    agents: list[FleetUnit]
    explored: set[tuple[int, int]]
    rng: np.random.Generator
    trace: Trace
    fires_created: int = 0
    fires_spawned: int = 0
    last_step_spread: bool = False
    last_step_discovery: bool = False

    def fire_by_id(self, fire_id: str) -> Fire | None:
        for fire in self.fires:
            if fire.fire_id == fire_id:
                return fire
        return None

    def agent_by_id(self, agent_id: str) -> FleetUnit:
        for unit in self.agents:
            if unit.agent_id == agent_id:
                return unit
        raise KeyError(agent_id)


@dataclass
class EpisodeResult:
    makespan: float
    fires_spawned: int
    victims_rescued: int
    trace: list[dict]
    completed: bool
    planner_label: str
    seed: int


def _initial_state_hash(world: WorldState) -> str:
    payload = {
        "agents": [(u.agent_id, u.class_id, list(u.position)) for u in world.agents],
        "fires": [(f.fire_id, list(f.position), f.health) for f in world.fires],
        "victims": [(v.victim_id, list(v.position)) for v in world.victims],
        "scenario": world.scenario.content_hash(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def initialize_world(
    scenario: ScenarioConfig,
    seed: int,
    trace: Trace | None = None,
    planner_label: str = "",
) -> WorldState:
    """Seeded initial world: fleet at the base, fires in the forest,
    victims anywhere on the map."""
    scenario.validate()
    trace = trace or Trace()
    rng = np.random.default_rng(seed)
    geo = scenario.geometry

    victims = []
    for i in range(scenario.victim_count):
        x = float(rng.uniform(0.0, geo.width))
        y = float(rng.uniform(0.0, geo.height))
        victims.append(Victim(f"v{i:03d}", (x, y)))

    fires = []
    fx0, fy0, fx1, fy1 = geo.forest_region
    for i in range(scenario.initial_fire_count):
        x = float(rng.uniform(fx0, fx1))
        y = float(rng.uniform(fy0, fy1))
        fires.append(
            Fire(
                f"f{i:03d}",
                (x, y),
                scenario.fire.initial_health,
                scenario.fire.growth_rate,
                scenario.fire.water_per_health,
            )
        )

    agents = []
    for class_id in sorted(scenario.fleet):
        for i in range(scenario.fleet[class_id]):
            agents.append(FleetUnit(f"{class_id}-{i:02d}", class_id, geo.base_position))

    world = WorldState(
        scenario=scenario,
        time=0.0,
        fires=fires,
        victims=victims,
        agents=agents,
        explored=set(),
        rng=rng,
        trace=trace,
        fires_created=len(fires),
    )
    trace.emit(
        0.0,
        "episode_start",
        "world",
        None,
        {
            "seed": seed,
            "planner": planner_label,
            "scenario_hash": scenario.content_hash(),
            "initial_hash": _initial_state_hash(world),
            "victim_count": scenario.victim_count,
            "grid": list(geo.grid_shape()),
            "dt": scenario.sim.dt,
            "time_limit": scenario.sim.time_limit,
            "classes": {cid: scenario.classes[cid].to_dict() for cid in sorted(scenario.classes)},
            "agents": {u.agent_id: u.class_id for u in agents},
        },
    )
    for fire in fires:
        trace.emit(
            0.0,
            "fire_ignited",
            fire.fire_id,
            fire.position,
            {
                "health": fire.health,
                "growth_rate": fire.growth_rate,
                "water_per_health": fire.water_per_health,
                "parent": None,
            },
        )
    return world


def _mission_speed(world: WorldState, unit: FleetUnit, mission: Mission) -> float:
    speed = world.scenario.classes[unit.class_id].capabilities.speed(mission.terrain)
    if speed <= 0:
        raise RuntimeError(
            f"{unit.agent_id} dispatched onto untraversable terrain {mission.terrain}"
        )
    return speed


def _build_legs(world: WorldState, unit: FleetUnit, mission: Mission) -> list[Leg]:
    geo = world.scenario.geometry
    handling = world.scenario.sim.handling_time
    if mission.kind is TaskKind.EXTINGUISH_FIRE:
        return [
            Leg(geo.base_position, 0.0, "load_water"),
            Leg(mission.target, handling, "deliver"),
        ]
    if mission.kind is TaskKind.RESCUE_VICTIM:
        legs = []
        cap = capacity_for(world.scenario.classes[unit.class_id], TaskKind.RESCUE_VICTIM)
        if unit.carried and len(unit.carried) + mission.contribution > cap + 1e-9:
            # Saturated: offload at the hospital before the new pickup.
            legs.append(Leg(geo.hospital_position, 0.0, "dropoff"))
        legs.append(Leg(mission.target, handling, "pickup"))
        legs.append(Leg(geo.hospital_position, 0.0, "dropoff"))
        return legs
    return [Leg(mission.target, handling, "survey")]


def _advance_agent(
    world: WorldState, unit: FleetUnit, dt: float, completions: list
) -> None:
    budget = dt
    while budget > TIME_EPS and unit.missions:
        mission = unit.missions[0]
        if mission.legs is None:
            mission.legs = _build_legs(world, unit, mission)
            mission.leg_index = 0
        if mission.leg_index >= len(mission.legs):
            unit.missions.pop(0)
            continue
        leg = mission.legs[mission.leg_index]
        if unit.service_remaining > TIME_EPS:
            used = min(budget, unit.service_remaining)
            unit.service_remaining -= used
            budget -= used
            if unit.service_remaining <= TIME_EPS:
                unit.service_remaining = 0.0
                completions.append((unit, mission, leg))
                mission.leg_index += 1
            continue
        speed = _mission_speed(world, unit, mission)
        gap = distance(unit.position, leg.target)
        if gap <= speed * budget + TIME_EPS:
            unit.position = leg.target
            budget -= gap / speed
            if leg.service > TIME_EPS:
                unit.service_remaining = leg.service
            else:
                completions.append((unit, mission, leg))
                mission.leg_index += 1
        else:
            frac = speed * budget / gap
            unit.position = (
                unit.position[0] + (leg.target[0] - unit.position[0]) * frac,
                unit.position[1] + (leg.target[1] - unit.position[1]) * frac,
            )
            budget = 0.0


def fire_spread(world: WorldState, fire: Fire) -> WorldState:
    """Spawn one child fire near a fully-grown parent (seeded draw)."""
    if fire.health < 100.0 - HEALTH_EPS:
        return world  # not hot enough to spread
    angle = float(world.rng.uniform(0.0, 2.0 * math.pi))
    radius = world.scenario.fire.spread_radius * math.sqrt(float(world.rng.uniform(0.0, 1.0)))
    geo = world.scenario.geometry
    x = min(max(fire.position[0] + radius * math.cos(angle), 0.0), geo.width)
    y = min(max(fire.position[1] + radius * math.sin(angle), 0.0), geo.height)
    child = Fire(
        f"f{world.fires_created:03d}",
        (x, y),
        world.scenario.fire.child_health,
        world.scenario.fire.growth_rate,
        world.scenario.fire.water_per_health,
    )
    world.fires.append(child)
    world.fires_created += 1
    world.fires_spawned += 1
    fire.health = 100.0
    fire.spread_armed = False
    world.trace.emit(
        world.time,
        "fire_ignited",
        child.fire_id,
        child.position,
        {
            "health": child.health,
            "growth_rate": child.growth_rate,
            "water_per_health": child.water_per_health,
            "parent": fire.fire_id,
        },
    )
    return world


def _grow_fires(world: WorldState, dt: float) -> bool:
    spread_happened = False
    for fire in list(world.fires):
        fire.health = min(100.0, fire.health + fire.growth_rate * dt)
        if fire.health >= 100.0 - HEALTH_EPS:
            fire.health = 100.0
            if fire.spread_armed and world.fires_created < world.scenario.fire.max_fires:
                fire_spread(world, fire)
                spread_happened = True
            fire.spread_armed = False
        else:
            fire.spread_armed = True
    return spread_happened


def discover(world: WorldState) -> tuple[WorldState, list[Victim]]:
    """Mark agent cells explored and identify victims in sensing range or in
    any explored cell."""
    geo = world.scenario.geometry
    for unit in world.agents:
        cell = geo.cell_of(unit.position)
        if cell not in world.explored:
            world.explored.add(cell)
            world.trace.emit(
                world.time,
                "cell_explored",
                f"{cell[0]},{cell[1]}",
                geo.cell_center(cell),
                {"by": unit.agent_id},
            )
    sensing = world.scenario.sim.sensing_radius
    newly = []
    for victim in world.victims:
        if victim.status is not VictimStatus.HIDDEN:
            continue
        seen = any(
            distance(victim.position, unit.position) <= sensing + 1e-12
            for unit in world.agents
        )
        if not seen and geo.cell_of(victim.position) not in world.explored:
            continue
        victim.status = VictimStatus.IDENTIFIED
        newly.append(victim)
        world.trace.emit(
            world.time, "victim_identified", victim.victim_id, victim.position, {}
        )
    return world, newly


def _apply_completion(world: WorldState, unit: FleetUnit, mission: Mission, leg: Leg) -> None:
    if leg.action == "load_water":
        cap = capacity_for(world.scenario.classes[unit.class_id], TaskKind.EXTINGUISH_FIRE)
        unit.water_load = min(mission.contribution, cap)
        world.trace.emit(
            world.time,
            "water_loaded",
            unit.agent_id,
            unit.position,
            {"amount": unit.water_load},
        )
    elif leg.action == "deliver":
        fire = world.fire_by_id(mission.fire_id) if mission.fire_id else None
        amount = unit.water_load
        unit.water_load = 0.0
        mission.action_done = True
        if fire is None or amount <= 0:
            return  # fire already out; the water is returned to stock
        fire.health -= amount / fire.water_per_health
        world.trace.emit(
            world.time,
            "water_delivered",
            unit.agent_id,
            unit.position,
            {"fire_id": fire.fire_id, "amount": amount},
        )
        if fire.health <= HEALTH_EPS:
            world.fires.remove(fire)
            world.trace.emit(
                world.time, "fire_extinguished", fire.fire_id, fire.position, {}
            )
    elif leg.action == "pickup":
        cls = world.scenario.classes[unit.class_id]
        room = int(capacity_for(cls, TaskKind.RESCUE_VICTIM)) - len(unit.carried)
        here = sorted(
            (
                v
                for v in world.victims
                if v.status is VictimStatus.IDENTIFIED and v.position == mission.target
            ),
            key=lambda v: v.victim_id,
        )
        take = min(room, int(round(mission.contribution)), len(here))
        mission.action_done = True
        if take <= 0:
            return
        ids = []
        for victim in here[:take]:
            victim.status = VictimStatus.CARRIED
            ids.append(victim.victim_id)
        unit.carried.extend(ids)
        world.trace.emit(
            world.time,
            "pickup",
            unit.agent_id,
            unit.position,
            {"victims": ids, "count": len(ids)},
        )
    elif leg.action == "dropoff":
        if not unit.carried:
            return
        ids = list(unit.carried)
        for victim in world.victims:
            if victim.victim_id in unit.carried:
                victim.status = VictimStatus.RESCUED
        unit.carried.clear()
        world.trace.emit(
            world.time,
            "dropoff",
            unit.agent_id,
            unit.position,
            {"victims": ids, "count": len(ids)},
        )
    elif leg.action == "survey":
        mission.action_done = True
        geo = world.scenario.geometry
        cell = mission.cell or geo.cell_of(unit.position)
        if cell not in world.explored:
            world.explored.add(cell)
            world.trace.emit(
                world.time,
                "cell_explored",
                f"{cell[0]},{cell[1]}",
                geo.cell_center(cell),
                {"by": unit.agent_id},
            )


def step(world: WorldState, dt: float) -> WorldState:
    """Advance the world: motion, fire growth, discovery, then arrivals."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    world.time = round(world.time + dt, 9)
    completions: list = []
    for unit in world.agents:
        _advance_agent(world, unit, dt, completions)
    spread = _grow_fires(world, dt)
    _, newly = discover(world)
    for unit, mission, leg in completions:
        _apply_completion(world, unit, mission, leg)
    world.last_step_spread = spread
    world.last_step_discovery = bool(newly)
    return world


def derive_tasks(world: WorldState) -> list[Task]:
    """Current work items: fires to douse, identified victims to carry,
    unexplored cells to survey."""
    geo = world.scenario.geometry
    tasks = []
    for fire in world.fires:
        need = fire.water_needed()
        tasks.append(
            Task(
                f"fire:{fire.fire_id}",
                TaskKind.EXTINGUISH_FIRE,
                fire.position,
                geo.terrain_at(fire.position),
                need,
                need,
            )
        )
    groups: dict[Point, list[Victim]] = {}
    for victim in world.victims:
        if victim.status is VictimStatus.IDENTIFIED:
            groups.setdefault(victim.position, []).append(victim)
    for position in sorted(groups, key=lambda p: min(v.victim_id for v in groups[p])):
        members = groups[position]
        anchor = min(v.victim_id for v in members)
        count = float(len(members))
        tasks.append(
            Task(
                f"rescue:{anchor}",
                TaskKind.RESCUE_VICTIM,
                position,
                geo.terrain_at(position),
                count,
                count,
            )
        )
    for cell in sorted(set(geo.all_cells()) - world.explored):
        center = geo.cell_center(cell)
        tasks.append(
            Task(
                f"explore:{cell[0]},{cell[1]}",
                TaskKind.EXPLORE,
                center,
                geo.terrain_at(center),
                1.0,
                1.0,
            )
        )
    return tasks


def execute_assignment(world: WorldState, assignment: Assignment) -> WorldState:
    """Queue the waypoint mission realizing one committed assignment."""
    unit = world.agent_by_id(assignment.agent_id)
    geo = world.scenario.geometry
    task_id = assignment.task_id
    if task_id.startswith("fire:"):
        fire = world.fire_by_id(task_id.split(":", 1)[1])
        if fire is None:
            raise ValueError(f"assignment targets extinguished fire {task_id}")
        mission = Mission(
            task_id,
            TaskKind.EXTINGUISH_FIRE,
            geo.terrain_at(fire.position),
            fire.position,
            assignment.contribution,
            fire_id=fire.fire_id,
        )
    elif task_id.startswith("rescue:"):
        anchor = task_id.split(":", 1)[1]
        victim = next((v for v in world.victims if v.victim_id == anchor), None)
        if victim is None:
            raise ValueError(f"assignment targets unknown victim {task_id}")
        mission = Mission(
            task_id,
            TaskKind.RESCUE_VICTIM,
            geo.terrain_at(victim.position),
            victim.position,
            assignment.contribution,
        )
    elif task_id.startswith("explore:"):
        i, j = (int(v) for v in task_id.split(":", 1)[1].split(","))
        center = geo.cell_center((i, j))
        mission = Mission(
            task_id,
            TaskKind.EXPLORE,
            geo.terrain_at(center),
            center,
            assignment.contribution,
            cell=(i, j),
        )
    else:
        raise ValueError(f"unrecognized task id {task_id!r}")
    unit.missions.append(mission)
    world.trace.emit(
        world.time,
        "dispatch",
        unit.agent_id,
        unit.position,
        {"task": task_id, "contribution": assignment.contribution},
    )
    return world


def predicted_completion(world: WorldState, unit: FleetUnit) -> float:
    """Exact finish time of the unit's queued missions under current kinematics."""
    t = world.time
    pos = unit.position
    first_pending = True
    for mission in unit.missions:
        legs = mission.legs
        start = mission.leg_index
        if legs is None:
            legs = _build_legs(world, unit, mission)
            start = 0
        speed = _mission_speed(world, unit, mission)
        for k in range(start, len(legs)):
            leg = legs[k]
            t += distance(pos, leg.target) / speed
            if first_pending and unit.service_remaining > 0:
                t += unit.service_remaining
            else:
                t += leg.service
            first_pending = False
            pos = leg.target
    return t


def planning_snapshot(world: WorldState) -> PlanningSnapshot:
    """Immutable view for the planner: live tasks minus in-flight work, and
    per-agent predicted free times."""
    tasks = derive_tasks(world)
    reserved: dict[str, float] = {}
    for unit in world.agents:
        for mission in unit.missions:
            if mission.action_done:
                continue
            reserved[mission.task_id] = reserved.get(mission.task_id, 0.0) + mission.contribution
    adjusted = []
    for task in tasks:
        load = reserved.get(task.task_id, 0.0)
        left = task.remaining_effort - load
        if left > 1e-9:
            adjusted.append(
                dataclasses.replace(task, remaining_effort=left) if load else task
            )
    agents = tuple(
        Agent(
            agent_id=unit.agent_id,
            class_id=unit.class_id,
            position=unit.position,
            water_load=unit.water_load,
            victim_load=len(unit.carried),
            busy_until=predicted_completion(world, unit),
        )
        for unit in world.agents
    )
    return PlanningSnapshot(
        now=world.time,
        tasks=tuple(adjusted),
        agents=agents,
        classes=world.scenario.classes,
        geometry=world.scenario.geometry,
        handling_time=world.scenario.sim.handling_time,
    )


def is_complete(world: WorldState) -> bool:
    if world.fires:
        return False
    if any(v.status is not VictimStatus.RESCUED for v in world.victims):
        return False
    nx, ny = world.scenario.geometry.grid_shape()
    return len(world.explored) == nx * ny


def _replan(world: WorldState, planner) -> None:
    for unit in world.agents:
        del unit.missions[1:]  # keep only the mission being executed
    snapshot = planning_snapshot(world)
    world.trace.emit(
        world.time,
        "replan",
        planner.label,
        None,
        {"open_tasks": len(snapshot.tasks)},
    )
    for unit in world.agents:
        world.trace.emit(
            world.time,
            "agent_state",
            unit.agent_id,
            unit.position,
            {"busy": unit.busy, "carrying": len(unit.carried)},
        )
    for assignment in planner.propose(snapshot):
        execute_assignment(world, assignment)


def run_episode(
    scenario: ScenarioConfig,
    planner,
    seed: int,
    trace_path: str | Path | None = None,
) -> EpisodeResult:
    """Planner-in-the-loop episode: replan on a fixed cadence plus whenever a
    fire spreads or a victim is discovered; run until everything is done or
    the time limit hits."""
    trace = Trace(trace_path)
    world = initialize_world(scenario, seed, trace, planner_label=planner.label)
    discover(world)  # agents sense their surroundings before anything moves

    interval = getattr(planner, "replan_interval", 5.0)
    limit = scenario.sim.time_limit
    last_replan: float | None = None
    event_replan = False
    completed = False
    makespan = limit

    while True:
        if is_complete(world):
            completed = True
            makespan = world.time
            break
        if world.time >= limit - TIME_EPS:
            break
        due = (
            last_replan is None
            or event_replan
            or world.time - last_replan >= interval - TIME_EPS
        )
        if due:
            _replan(world, planner)
            last_replan = world.time
            event_replan = False
        step(world, scenario.sim.dt)
        if world.last_step_spread or world.last_step_discovery:
            event_replan = True

    victims_rescued = sum(1 for v in world.victims if v.status is VictimStatus.RESCUED)
    trace.emit(
        world.time,
        "episode_end",
        "world",
        None,
        {
            "makespan": makespan,
            "completed": completed,
            "fires_spawned": world.fires_spawned,
            "victims_rescued": victims_rescued,
        },
    )
    trace.close()
    return EpisodeResult(
        makespan=makespan,
        fires_spawned=world.fires_spawned,
        victims_rescued=victims_rescued,
        trace=trace.events,
        completed=completed,
        planner_label=planner.label,
        seed=seed,
    )
