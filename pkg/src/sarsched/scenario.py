"""Scenario files: strict key/value config for world, fleet and dynamics.

Unknown or missing keys are hard errors so typos never silently change an
experiment. Class capability definitions may be overridden in the file;
otherwise the built-in four types are used.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .domain import AgentClass, BUILTIN_CLASSES, CapabilityVector, WorldGeometry


class ScenarioError(Exception):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class FireParams:
    initial_health: float
    growth_rate: float  # health percent per time unit
    water_per_health: float  # effort units per health percent
    spread_radius: float
    child_health: float
    max_fires: int  # total ignitions allowed per episode


@dataclass(frozen=True)
class SimParams:
    dt: float
    sensing_radius: float
    time_limit: float
    handling_time: float


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: WorldGeometry
    classes: dict[str, AgentClass]
    fleet: dict[str, int]  # class_id -> unit count
    victim_count: int
    initial_fire_count: int
    fire: FireParams
    sim: SimParams

    def validate(self) -> None:
        if self.victim_count < 0 or self.initial_fire_count < 0:
            raise ScenarioError("victim and fire counts must be >= 0")
        for class_id, count in self.fleet.items():
            if class_id not in self.classes:
                raise ScenarioError(f"fleet references unknown class {class_id!r}")
            if count < 0:
                raise ScenarioError(f"fleet count for {class_id!r} must be >= 0")
        geo = self.geometry
        cx0, cy0, cx1, cy1 = geo.city_region
        fx0, fy0, fx1, fy1 = geo.forest_region
        overlap_w = min(cx1, fx1) - max(cx0, fx0)
        overlap_h = min(cy1, fy1) - max(cy0, fy0)
        if overlap_w > 1e-9 and overlap_h > 1e-9:
            raise ScenarioError("city and forest regions overlap")
        if self.initial_fire_count > 0 and (fx1 - fx0 <= 0 or fy1 - fy0 <= 0):
            raise ScenarioError("fires require a forest region with positive area")
        fire = self.fire
        if not 0 < fire.initial_health <= 100 or not 0 < fire.child_health <= 100:
            raise ScenarioError("fire health values must lie in (0, 100]")
        if fire.growth_rate < 0 or fire.water_per_health <= 0 or fire.spread_radius < 0:
            raise ScenarioError("fire dynamics parameters out of range")
        if fire.max_fires < self.initial_fire_count:
            raise ScenarioError("max_fires must cover the initial fires")
        sim = self.sim
        if sim.dt <= 0 or sim.time_limit <= 0 or sim.handling_time < 0 or sim.sensing_radius < 0:
            raise ScenarioError("simulator constants out of range")

    def to_canonical(self) -> dict:
        geo = self.geometry
        return {
            "geometry": {
                "width": geo.width,
                "height": geo.height,
                "base": list(geo.base_position),
                "hospital": list(geo.hospital_position),
                "city": list(geo.city_region),
                "forest": list(geo.forest_region),
                "cell_size": geo.cell_size,
            },
            "classes": {
                cid: self.classes[cid].to_dict() for cid in sorted(self.classes)
            },
            "fleet": {cid: self.fleet[cid] for cid in sorted(self.fleet)},
            "victims": self.victim_count,
            "initial_fires": self.initial_fire_count,
            "fire": {
                "initial_health": self.fire.initial_health,
                "growth_rate": self.fire.growth_rate,
                "water_per_health": self.fire.water_per_health,
                "spread_radius": self.fire.spread_radius,
                "child_health": self.fire.child_health,
                "max_fires": self.fire.max_fires,
            },
            "sim": {
                "dt": self.sim.dt,
                "sensing_radius": self.sim.sensing_radius,
                "time_limit": self.sim.time_limit,
                "handling_time": self.sim.handling_time,
            },
        }

    def content_hash(self) -> str:
        payload = json.dumps(self.to_canonical(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _check_keys(section: dict, allowed: set[str], path: str) -> None:
    if not isinstance(section, dict):
        raise ScenarioError(f"{path}: expected a mapping")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ScenarioError(f"{path}: unknown key(s) {', '.join(map(repr, unknown))}")
    missing = sorted(allowed - set(section))
    if missing:
        raise ScenarioError(f"{path}: missing key(s) {', '.join(map(repr, missing))}")


def _point(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"{path}: expected [x, y]")
    return float(value[0]), float(value[1])


def _rect(value, path: str) -> tuple[float, float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ScenarioError(f"{path}: expected [x0, y0, x1, y1]")
    return tuple(float(v) for v in value)  # type: ignore[return-value]


def scenario_from_dict(data: dict) -> ScenarioConfig:
    top = {"geometry", "fleet", "victims", "initial_fires", "fire", "sim"}
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a mapping at the top level")
    has_classes = "classes" in data
    _check_keys(
        {k: v for k, v in data.items() if k != "classes"}, top, "scenario"
    )

    geo_section = data["geometry"]
    _check_keys(
        geo_section,
        {"width", "height", "base", "hospital", "city", "forest", "cell_size"},
        "geometry",
    )
    try:
        geometry = WorldGeometry(
            width=float(geo_section["width"]),
            height=float(geo_section["height"]),
            base_position=_point(geo_section["base"], "geometry.base"),
            hospital_position=_point(geo_section["hospital"], "geometry.hospital"),
            city_region=_rect(geo_section["city"], "geometry.city"),
            forest_region=_rect(geo_section["forest"], "geometry.forest"),
            cell_size=float(geo_section["cell_size"]),
        )
    except ValueError as exc:
        raise ScenarioError(f"geometry: {exc}") from exc

    if has_classes:
        classes = {}
        for class_id, spec in data["classes"].items():
            _check_keys(
                spec,
                {"water_capacity", "rescue_capacity", "speed_forest", "speed_city"},
                f"classes.{class_id}",
            )
            try:
                classes[str(class_id)] = AgentClass(
                    str(class_id),
                    CapabilityVector(
                        float(spec["water_capacity"]),
                        float(spec["rescue_capacity"]),
                        float(spec["speed_forest"]),
                        float(spec["speed_city"]),
                    ),
                )
            except ValueError as exc:
                raise ScenarioError(f"classes.{class_id}: {exc}") from exc
    else:
        classes = dict(BUILTIN_CLASSES)

    fleet_section = data["fleet"]
    if not isinstance(fleet_section, dict) or not fleet_section:
        raise ScenarioError("fleet: expected a non-empty mapping of class -> count")
    fleet = {str(cid): int(count) for cid, count in fleet_section.items()}

    fire_section = data["fire"]
    _check_keys(
        fire_section,
        {
            "initial_health",
            "growth_rate",
            "water_per_health",
            "spread_radius",
            "child_health",
            "max_fires",
        },
        "fire",
    )
    fire = FireParams(
        initial_health=float(fire_section["initial_health"]),
        growth_rate=float(fire_section["growth_rate"]),
        water_per_health=float(fire_section["water_per_health"]),
        spread_radius=float(fire_section["spread_radius"]),
        child_health=float(fire_section["child_health"]),
        max_fires=int(fire_section["max_fires"]),
    )

    sim_section = data["sim"]
    _check_keys(
        sim_section, {"dt", "sensing_radius", "time_limit", "handling_time"}, "sim"
    )
    sim = SimParams(
        dt=float(sim_section["dt"]),
        sensing_radius=float(sim_section["sensing_radius"]),
        time_limit=float(sim_section["time_limit"]),
        handling_time=float(sim_section["handling_time"]),
    )

    scenario = ScenarioConfig(
        geometry=geometry,
        classes=classes,
        fleet=fleet,
        victim_count=int(data["victims"]),
        initial_fire_count=int(data["initial_fires"]),
        fire=fire,
        sim=sim,
    )
    scenario.validate()
    return scenario


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario file is not valid YAML: {exc}") from exc
    return scenario_from_dict(data)
