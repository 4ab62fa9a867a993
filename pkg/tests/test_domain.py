import dataclasses
import itertools

import numpy as np
import pytest

from sarsched.domain import (
    AGV,
    BUILTIN_CLASSES,
    DRONE,
    GROUND_UNIT,
    HELICOPTER,
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

FOREST_ONLY = WorldGeometry(
    width=30.0,
    height=30.0,
    base_position=(0.0, 0.0),
    hospital_position=(0.0, 1.0),
    city_region=(0.0, 0.0, 0.0, 0.0),
    forest_region=(0.0, 0.0, 30.0, 30.0),
    cell_size=30.0,
)


def make_task(kind=TaskKind.EXTINGUISH_FIRE, location=(5.0, 0.0), terrain=Terrain.FOREST, effort=1.0):
    return Task("t0", kind, location, terrain, effort, effort)


def test_builtin_classes_match_capability_table():
    table = {
        "ground_unit": {"water_capacity": 1, "rescue_capacity": 1, "speed_forest": 0.1, "speed_city": 0.1},
        "helicopter": {"water_capacity": 5, "rescue_capacity": 4, "speed_forest": 0.5, "speed_city": 0.5},
        "drone": {"water_capacity": 0, "rescue_capacity": 0, "speed_forest": 0.40, "speed_city": 0.40},
        "agv": {"water_capacity": 2, "rescue_capacity": 4, "speed_forest": 0.20, "speed_city": 0.00},
    }
    assert set(BUILTIN_CLASSES) == set(table)
    for class_id, expected in table.items():
        serialized = BUILTIN_CLASSES[class_id].to_dict()
        assert serialized.pop("class_id") == class_id
        assert serialized == expected


def test_capacity_for_values():
    assert capacity_for(HELICOPTER, TaskKind.EXTINGUISH_FIRE) == 5
    assert capacity_for(AGV, TaskKind.RESCUE_VICTIM) == 4
    assert capacity_for(DRONE, TaskKind.EXTINGUISH_FIRE) == 0
    for cls in BUILTIN_CLASSES.values():
        assert capacity_for(cls, TaskKind.EXPLORE) == 1


def test_dispatch_rules_on_builtin_fleet():
    # AGVs can fight forest fires but cannot enter the city at all.
    assert is_dispatchable(AGV, make_task(terrain=Terrain.FOREST))
    assert not is_dispatchable(AGV, make_task(terrain=Terrain.CITY))
    assert not is_dispatchable(AGV, make_task(TaskKind.RESCUE_VICTIM, terrain=Terrain.CITY))
    # Drones carry nothing, so they only explore.
    assert not is_dispatchable(DRONE, make_task(TaskKind.RESCUE_VICTIM))
    assert not is_dispatchable(DRONE, make_task(TaskKind.EXTINGUISH_FIRE))
    assert is_dispatchable(DRONE, make_task(TaskKind.EXPLORE))


def test_zero_capacity_implies_not_dispatchable_full_cross_product():
    for cls, kind, terrain in itertools.product(
        BUILTIN_CLASSES.values(), TaskKind, Terrain
    ):
        task = make_task(kind, terrain=terrain)
        if capacity_for(cls, kind) == 0:
            assert not is_dispatchable(cls, task)
        else:
            assert is_dispatchable(cls, task) == (cls.capabilities.speed(terrain) > 0)


def test_trip_duration_examples():
    fire = make_task(location=(5.0, 0.0))
    assert trip_duration(HELICOPTER, fire, FOREST_ONLY, handling_time=0.0) == pytest.approx(20.0)
    assert trip_duration(GROUND_UNIT, fire, FOREST_ONLY, handling_time=0.0) == pytest.approx(100.0)
    at_base = make_task(location=(0.0, 0.0))
    assert trip_duration(HELICOPTER, at_base, FOREST_ONLY, handling_time=0.0) == 0.0
    assert trip_duration(HELICOPTER, at_base, FOREST_ONLY, handling_time=1.5) == 1.5


def test_trip_duration_rejects_undispatchable():
    with pytest.raises(NotDispatchable):
        trip_duration(DRONE, make_task(TaskKind.RESCUE_VICTIM), FOREST_ONLY)


def test_trip_duration_monotone_in_distance_and_speed():
    rng = np.random.default_rng(7)
    for _ in range(200):
        d1, d2 = sorted(rng.uniform(0.0, 20.0, size=2))
        v1, v2 = sorted(rng.uniform(0.05, 3.0, size=2))
        slow = AgentClass("slow", CapabilityVector(1, 1, v1, v1))
        fast = AgentClass("fast", CapabilityVector(1, 1, v2, v2))
        near = make_task(location=(d1, 0.0))
        far = make_task(location=(d2, 0.0))
        assert trip_duration(fast, near, FOREST_ONLY) <= trip_duration(fast, far, FOREST_ONLY)
        if d1 > 0 and v1 < v2:
            assert trip_duration(slow, near, FOREST_ONLY) > trip_duration(fast, near, FOREST_ONLY)


def test_domain_types_are_immutable():
    task = make_task()
    with pytest.raises(dataclasses.FrozenInstanceError):
        task.remaining_effort = 0.0
    with pytest.raises(dataclasses.FrozenInstanceError):
        HELICOPTER.capabilities.water_capacity = 9


def test_invariant_validation():
    with pytest.raises(ValueError):
        CapabilityVector(-1, 0, 0, 0)
    with pytest.raises(ValueError):
        Task("t", TaskKind.EXPLORE, (0, 0), Terrain.CITY, required_effort=0, remaining_effort=0)
    with pytest.raises(ValueError):
        Task("t", TaskKind.EXPLORE, (0, 0), Terrain.CITY, required_effort=1, remaining_effort=2)
    with pytest.raises(ValueError):
        Assignment("a", "t", contribution=0, start_time=0, duration=1)
    with pytest.raises(ValueError):
        Assignment("a", "t", contribution=1, start_time=0, duration=0)
    with pytest.raises(ValueError):
        WorldGeometry(10, 10, (11, 0), (0, 0), (0, 0, 5, 10), (5, 0, 10, 10), 2)


def test_geometry_grid_and_terrain():
    geo = WorldGeometry(
        width=20.0,
        height=20.0,
        base_position=(1.0, 1.0),
        hospital_position=(1.0, 2.0),
        city_region=(0.0, 0.0, 10.0, 20.0),
        forest_region=(10.0, 0.0, 20.0, 20.0),
        cell_size=4.0,
    )
    assert geo.grid_shape() == (5, 5)
    assert len(geo.all_cells()) == 25
    assert geo.terrain_at((3.0, 3.0)) is Terrain.CITY
    assert geo.terrain_at((15.0, 3.0)) is Terrain.FOREST
    assert geo.cell_of((0.0, 0.0)) == (0, 0)
    assert geo.cell_of((19.9, 19.9)) == (4, 4)
    assert geo.cell_center((0, 0)) == (2.0, 2.0)
    center = geo.cell_center((4, 4))
    assert geo.cell_of(center) == (4, 4)
