"""Capability-typed agents, tasks and trip arithmetic.

Agents belong to classes described by a capability vector (load capacities
plus per-terrain speeds). Tasks are units of demanded effort at a location.
Dispatching rules decide which classes can serve which tasks, and trip
durations are round trips from the base at the speed for the task's terrain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

Point = tuple[float, float]

#: Service time added to every trip (loading/unloading at the endpoints).
#: Zero would allow degenerate zero-duration tasks at the base.
DEFAULT_HANDLING_TIME = 1.0


class Terrain(Enum):
    FOREST = "forest"
    CITY = "city"


class TaskKind(Enum):
    EXTINGUISH_FIRE = "extinguish_fire"
    RESCUE_VICTIM = "rescue_victim"
    EXPLORE = "explore"


class NotDispatchable(Exception):
    """Raised when an agent class cannot serve the requested task."""


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class CapabilityVector:
    """Per-trip load capacities and terrain speeds of one agent class.

    A zero speed means the terrain is untraversable for the class; a zero
    capacity means the class cannot contribute to that kind of task.
    """

    water_capacity: float
    rescue_capacity: float
    speed_forest: float
    speed_city: float

    def __post_init__(self) -> None:
        for name in ("water_capacity", "rescue_capacity", "speed_forest", "speed_city"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def speed(self, terrain: Terrain) -> float:
        return self.speed_forest if terrain is Terrain.FOREST else self.speed_city

    def max_speed(self) -> float:
        return max(self.speed_forest, self.speed_city)


@dataclass(frozen=True)
class AgentClass:
    class_id: str
    capabilities: CapabilityVector

    def to_dict(self) -> dict:
        caps = self.capabilities
        return {
            "class_id": self.class_id,
            "water_capacity": caps.water_capacity,
            "rescue_capacity": caps.rescue_capacity,
            "speed_forest": caps.speed_forest,
            "speed_city": caps.speed_city,
        }


@dataclass(frozen=True)
class Agent:
    """Kinematic and load state of one fleet unit."""

    agent_id: str
    class_id: str
    position: Point
    water_load: float = 0.0
    victim_load: int = 0
    busy_until: float = 0.0

    def __post_init__(self) -> None:
        if self.water_load < 0 or self.victim_load < 0 or self.busy_until < 0:
            raise ValueError("loads and busy_until must be >= 0")


@dataclass(frozen=True)
class Task:
    """One unit of demanded effort at a location.

    ``required_effort`` is the total demand; ``remaining_effort`` tracks what
    is still uncovered after partial contributions.
    """

    task_id: str
    kind: TaskKind
    location: Point
    terrain: Terrain
    required_effort: float
    remaining_effort: float

    def __post_init__(self) -> None:
        if self.required_effort <= 0:
            raise ValueError("required_effort must be > 0")
        if not 0 <= self.remaining_effort <= self.required_effort:
            raise ValueError("remaining_effort must lie in [0, required_effort]")


@dataclass(frozen=True)
class Assignment:
    """One planned trip: an agent contributing effort to a task."""

    agent_id: str
    task_id: str
    contribution: float
    start_time: float
    duration: float

    def __post_init__(self) -> None:
        if self.contribution <= 0:
            raise ValueError("contribution must be > 0")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")


Rect = tuple[float, float, float, float]  # x0, y0, x1, y1


def rect_contains(rect: Rect, p: Point) -> bool:
    x0, y0, x1, y1 = rect
    return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


@dataclass(frozen=True)
class WorldGeometry:
    """Rectangular world with a base, a hospital and two terrain regions."""

    width: float
    height: float
    base_position: Point
    hospital_position: Point
    city_region: Rect
    forest_region: Rect
    cell_size: float

    def __post_init__(self) -> None:
        bounds = (0.0, 0.0, self.width, self.height)
        for name, p in (("base", self.base_position), ("hospital", self.hospital_position)):
            if not rect_contains(bounds, p):
                raise ValueError(f"{name} position outside world bounds")
        for name, rect in (("city", self.city_region), ("forest", self.forest_region)):
            if not (rect_contains(bounds, rect[:2]) and rect_contains(bounds, rect[2:])):
                raise ValueError(f"{name} region outside world bounds")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")

    def terrain_at(self, p: Point) -> Terrain:
        # City wins on the shared boundary; everything else is forest.
        if rect_contains(self.city_region, p):
            return Terrain.CITY
        return Terrain.FOREST

    def grid_shape(self) -> tuple[int, int]:
        return (
            max(1, math.ceil(self.width / self.cell_size - 1e-9)),
            max(1, math.ceil(self.height / self.cell_size - 1e-9)),
        )

    def cell_of(self, p: Point) -> tuple[int, int]:
        nx, ny = self.grid_shape()
        i = min(nx - 1, max(0, int(p[0] / self.cell_size)))
        j = min(ny - 1, max(0, int(p[1] / self.cell_size)))
        return i, j

    def cell_center(self, cell: tuple[int, int]) -> Point:
        i, j = cell
        return (
            min((i + 0.5) * self.cell_size, self.width),
            min((j + 0.5) * self.cell_size, self.height),
        )

    def all_cells(self) -> list[tuple[int, int]]:
        nx, ny = self.grid_shape()
        return [(i, j) for i in range(nx) for j in range(ny)]


def capacity_for(agent_class: AgentClass, kind: TaskKind) -> float:
    """Per-trip contribution of a class towards one kind of task.

    Exploration counts one visit per trip regardless of the class.
    """
    caps = agent_class.capabilities
    if kind is TaskKind.EXTINGUISH_FIRE:
        return caps.water_capacity
    if kind is TaskKind.RESCUE_VICTIM:
        return caps.rescue_capacity
    return 1.0


def is_dispatchable(agent_class: AgentClass, task: Task) -> bool:
    """True iff the class can contribute to the task and traverse its terrain."""
    if capacity_for(agent_class, task.kind) <= 0:
        return False
    return agent_class.capabilities.speed(task.terrain) > 0


def trip_duration(
    agent_class: AgentClass,
    task: Task,
    geometry: WorldGeometry,
    handling_time: float = DEFAULT_HANDLING_TIME,
) -> float:
    """Round-trip time from the base to the task at the terrain speed."""
    if not is_dispatchable(agent_class, task):
        raise NotDispatchable(f"{agent_class.class_id} cannot serve {task.task_id}")
    speed = agent_class.capabilities.speed(task.terrain)
    return 2.0 * distance(geometry.base_position, task.location) / speed + handling_time


GROUND_UNIT = AgentClass("ground_unit", CapabilityVector(1, 1, 0.1, 0.1))
HELICOPTER = AgentClass("helicopter", CapabilityVector(5, 4, 0.5, 0.5))
DRONE = AgentClass("drone", CapabilityVector(0, 0, 0.40, 0.40))
AGV = AgentClass("agv", CapabilityVector(2, 4, 0.20, 0.00))

BUILTIN_CLASSES: dict[str, AgentClass] = {
    c.class_id: c for c in (GROUND_UNIT, HELICOPTER, DRONE, AGV)
}
