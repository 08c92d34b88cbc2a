"""Scripted scenarios: the input format for harness runs and the recording
format the live session server produces for offline replay."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

from .audio import Level
from .catalog import Catalog
from .errors import InvalidScenario
from .protocol import ProtocolConfig
from .simnet import NetworkConfig

DEVICE_IDS = ("A", "B")

MODES = ("eavesdrop", "openair")


@dataclass(frozen=True)
class Tap:
    wall_id: str
    x: float
    y: float


@dataclass(frozen=True)
class SetLevel:
    level: Level


@dataclass(frozen=True)
class SwitchWall:
    wall_id: str


@dataclass(frozen=True)
class StopPersonal:
    pass


Action = Tap | SetLevel | SwitchWall | StopPersonal


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    device: str
    action: Action


@dataclass(frozen=True)
class Scenario:
    catalog_ref: str
    network: NetworkConfig
    protocol: ProtocolConfig
    mode: str
    events: tuple[ScenarioEvent, ...]
    end_ms: int


def _action_to_dict(action: Action) -> dict:
    if isinstance(action, Tap):
        return {"kind": "tap", "wall_id": action.wall_id, "x": action.x, "y": action.y}
    if isinstance(action, SetLevel):
        return {"kind": "set_level", "level": action.level.value}
    if isinstance(action, SwitchWall):
        return {"kind": "switch_wall", "wall_id": action.wall_id}
    return {"kind": "stop"}


def _action_from_dict(obj: dict, where: str) -> Action:
    kind = obj.get("kind")
    if kind == "tap":
        return Tap(obj["wall_id"], obj["x"], obj["y"])
    if kind == "set_level":
        try:
            return SetLevel(Level(obj["level"]))
        except ValueError as exc:
            raise InvalidScenario(f"{where}: unknown level {obj.get('level')!r}") from exc
    if kind == "switch_wall":
        return SwitchWall(obj["wall_id"])
    if kind == "stop":
        return StopPersonal()
    raise InvalidScenario(f"{where}: unknown action kind {kind!r}")


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "catalog_ref": scenario.catalog_ref,
        "network": asdict(scenario.network),
        "protocol": asdict(scenario.protocol),
        "mode": scenario.mode,
        "end_ms": scenario.end_ms,
        "events": [
            {"at_ms": ev.at_ms, "device": ev.device, "action": _action_to_dict(ev.action)}
            for ev in scenario.events
        ],
    }


def scenario_from_dict(obj: dict) -> Scenario:
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario must be a JSON object")
    try:
        network = NetworkConfig(**obj.get("network", {}))
        protocol = ProtocolConfig(**obj.get("protocol", {}))
    except (TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad network/protocol config: {exc}") from exc
    mode = obj.get("mode", "eavesdrop")
    if mode not in MODES:
        raise InvalidScenario(f"unknown mode {mode!r}")
    raw_events = obj.get("events", [])
    events = []
    for i, raw in enumerate(raw_events):
        where = f"events[{i}]"
        try:
            at_ms = raw["at_ms"]
            device = raw["device"]
            action = _action_from_dict(raw["action"], where)
        except (KeyError, TypeError) as exc:
            raise InvalidScenario(f"{where}: {exc}") from exc
        if not isinstance(at_ms, int) or at_ms < 0:
            raise InvalidScenario(f"{where}: at_ms must be a non-negative integer")
        if device not in DEVICE_IDS:
            raise InvalidScenario(f"{where}: device must be one of {DEVICE_IDS}")
        events.append(ScenarioEvent(at_ms, device, action))
    # stable sort keeps file order for equal times, the declared tie-break
    events.sort(key=lambda ev: ev.at_ms)
    try:
        end_ms = int(obj["end_ms"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad end_ms: {exc}") from exc
    if events and end_ms < events[-1].at_ms:
        raise InvalidScenario("end_ms must cover the last event")
    if end_ms < 0:
        raise InvalidScenario("end_ms must be non-negative")
    return Scenario(
        catalog_ref=str(obj.get("catalog_ref", "")),
        network=network,
        protocol=protocol,
        mode=mode,
        events=tuple(events),
        end_ms=end_ms,
    )


def load_scenario(source: bytes | str) -> Scenario:
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_dict(obj)


def load_scenario_file(path) -> Scenario:
    with open(path, "rb") as fh:
        return load_scenario(fh.read())


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2)


def validate_against_catalog(scenario: Scenario, catalog: Catalog) -> None:
    """Check that every event resolves in the catalog before running."""
    for i, ev in enumerate(scenario.events):
        where = f"events[{i}]"
        action = ev.action
        if isinstance(action, (Tap, SwitchWall)):
            wall = catalog.wall(action.wall_id)
            if wall is None:
                raise InvalidScenario(f"{where}: unknown wall {action.wall_id!r}")
            if isinstance(action, Tap):
                if not (0 <= action.x <= wall.width_px and 0 <= action.y <= wall.height_px):
                    raise InvalidScenario(f"{where}: tap point outside wall bounds")


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    return replace(scenario, network=replace(scenario.network, seed=seed))
