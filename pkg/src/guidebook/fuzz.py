"""Randomized scenario generation and invariant checking.

Generated times are multiples of a small grid (default 10 ms) so that the
sampling oracle can resolve every change point exactly; loss, duplication,
and reordering still arise freely from the network config.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from . import audio
from .audio import Level, Playing, Source, gain_for
from .catalog import Catalog, catalog_from_document
from .engine import Timeline, render_for_mode, run_scenario
from .errors import InvariantViolation
from .protocol import ProtocolConfig
from .scenario import (
    DEVICE_IDS,
    Scenario,
    ScenarioEvent,
    SetLevel,
    StopPersonal,
    SwitchWall,
    Tap,
)
from .simnet import NetworkConfig

_LEVELS = (Level.OFF, Level.QUIET, Level.LOUD)


def fuzz_catalog() -> Catalog:
    """Small catalog with short clips so fuzz runs see many expiries."""
    durations = [700, 1200, 2500, 4000, 900, 1600, 3100, 550]
    clips = [
        {"clip_id": f"clip-{i}", "duration_ms": d, "title": f"Exhibit {i}"}
        for i, d in enumerate(durations)
    ]
    walls = []
    rooms = []
    clip_idx = 0
    for r in range(2):
        wall_ids = []
        for w in range(2):
            wall_id = f"r{r}w{w}"
            targets = []
            for t in range(2):
                x0 = 40 + 220 * t
                targets.append({
                    "target_id": f"{wall_id}t{t}",
                    "clip_id": f"clip-{clip_idx % len(clips)}",
                    "polygon": [[x0, 60], [x0 + 160, 60], [x0 + 160, 260], [x0, 260]],
                })
                clip_idx += 1
            walls.append({
                "wall_id": wall_id,
                "room_id": f"room-{r}",
                "image_ref": f"assets/{wall_id}.png",
                "width_px": 480,
                "height_px": 320,
                "targets": targets,
            })
            wall_ids.append(wall_id)
        rooms.append({"room_id": f"room-{r}", "name": f"Room {r}", "walls": wall_ids})
    return catalog_from_document({"rooms": rooms, "walls": walls, "clips": clips})


@dataclass(frozen=True)
class FuzzProfile:
    max_loss: float = 0.3
    max_delay_ms: int = 200
    max_duplicate: float = 0.1
    grid_ms: int = 10
    min_events: int = 4
    max_events: int = 14
    min_horizon_ms: int = 4000
    max_horizon_ms: int = 12000
    mode: str = "eavesdrop"


def _interior_point(polygon) -> tuple[float, float]:
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    return (sum(xs) / len(xs), sum(ys) / len(ys))  # convex targets: centroid is inside


def random_scenario(rng: random.Random, catalog: Catalog,
                    profile: FuzzProfile = FuzzProfile(),
                    catalog_ref: str = "") -> Scenario:
    grid = profile.grid_ms
    horizon = rng.randrange(profile.min_horizon_ms, profile.max_horizon_ms, grid)
    n_events = rng.randint(profile.min_events, profile.max_events)
    times = sorted(rng.randrange(0, horizon, grid) for _ in range(n_events))
    events = []
    for at_ms in times:
        device = rng.choice(DEVICE_IDS)
        roll = rng.random()
        if roll < 0.55:
            wall = rng.choice(catalog.walls)
            if wall.targets and rng.random() < 0.75:
                x, y = _interior_point(rng.choice(wall.targets).polygon)
            else:
                x = rng.randint(0, wall.width_px)
                y = rng.randint(0, wall.height_px)
            action = Tap(wall.wall_id, x, y)
        elif roll < 0.75:
            action = SetLevel(rng.choice(_LEVELS))
        elif roll < 0.85:
            action = SwitchWall(rng.choice(catalog.walls).wall_id)
        else:
            action = StopPersonal()
        events.append(ScenarioEvent(at_ms, device, action))
    delay_min = grid * rng.randint(0, profile.max_delay_ms // grid)
    delay_max = grid * rng.randint(delay_min // grid, profile.max_delay_ms // grid)
    network = NetworkConfig(
        loss_probability=round(rng.uniform(0.0, profile.max_loss), 3),
        delay_min_ms=delay_min,
        delay_max_ms=delay_max,
        duplicate_probability=round(rng.uniform(0.0, profile.max_duplicate), 3),
        seed=rng.getrandbits(63),
    )
    end_ms = horizon + rng.randrange(2000, 6000, grid)
    return Scenario(catalog_ref=catalog_ref, network=network,
                    protocol=ProtocolConfig(), mode=profile.mode,
                    events=tuple(events), end_ms=end_ms)


class InvariantChecker:
    """Engine observer asserting the audio-state and protocol invariants at
    every change point of a run."""

    def __init__(self, scenario: Scenario, catalog: Catalog,
                 quiet_gain: float = audio.DEFAULT_QUIET_GAIN):
        self.scenario = scenario
        self.catalog = catalog
        self.quiet_gain = quiet_gain
        self._last_send_seq = {d: 0 for d in DEVICE_IDS}
        self._last_peer_seq = {d: 0 for d in DEVICE_IDS}

    def __call__(self, now_ms, devices, renders) -> None:
        catalog = self.catalog
        mode = self.scenario.mode
        fresh = {}
        for device_id, state in devices.items():
            fresh[device_id] = render_for_mode(mode, devices, device_id, catalog,
                                               now_ms, self.quiet_gain)
        for device_id, state in devices.items():
            r = fresh[device_id]
            own_active = state.own is not None and state.own.active_at(now_ms, catalog)
            if own_active:
                if not isinstance(r, Playing) or r.source is not Source.PERSONAL:
                    raise InvariantViolation(
                        f"{device_id}@{now_ms}: personal clip active but render={r}")
                if r.clip_id != state.own.clip_id or r.gain != 1.0 or r.reverb:
                    raise InvariantViolation(
                        f"{device_id}@{now_ms}: personal render malformed: {r}")
            if isinstance(r, Playing):
                duration = catalog.duration_ms(r.clip_id)
                if not (0 <= r.position_ms < duration):
                    raise InvariantViolation(
                        f"{device_id}@{now_ms}: position {r.position_ms} outside "
                        f"[0, {duration})")
                if r.source is Source.EAVESDROPPED:
                    if own_active:
                        raise InvariantViolation(
                            f"{device_id}@{now_ms}: eavesdropping while own active")
                    if mode == "eavesdrop":
                        if not r.reverb:
                            raise InvariantViolation(
                                f"{device_id}@{now_ms}: eavesdropped render lacks reverb")
                        if state.level is Level.OFF:
                            raise InvariantViolation(
                                f"{device_id}@{now_ms}: eavesdropping while level Off")
                        if r.gain != gain_for(state.level, self.quiet_gain):
                            raise InvariantViolation(
                                f"{device_id}@{now_ms}: gain {r.gain} != level gain")
                elif r.source is Source.PERSONAL and not own_active:
                    raise InvariantViolation(
                        f"{device_id}@{now_ms}: personal render without active clip")
            if state.next_send_seq < self._last_send_seq[device_id]:
                raise InvariantViolation(f"{device_id}@{now_ms}: send seq went backwards")
            if state.last_applied_peer_seq < self._last_peer_seq[device_id]:
                raise InvariantViolation(f"{device_id}@{now_ms}: applied seq went backwards")
            self._last_send_seq[device_id] = state.next_send_seq
            self._last_peer_seq[device_id] = state.last_applied_peer_seq

        net = self.scenario.network
        if net.loss_probability == 0.0 and mode == "eavesdrop":
            # bounded skew applies to one shared playback instance: a personal
            # clip on one side, the other eavesdropping a model at least as
            # new as that instance (an older model means the Start is still in
            # flight, which lasts at most delay_max)
            for personal_id, eaves_id in (("A", "B"), ("B", "A")):
                rp, re = fresh[personal_id], fresh[eaves_id]
                if not (isinstance(rp, Playing) and rp.source is Source.PERSONAL
                        and isinstance(re, Playing)
                        and re.source is Source.EAVESDROPPED
                        and rp.clip_id == re.clip_id):
                    continue
                own = devices[personal_id].own
                model = devices[eaves_id].peer_model
                if own is None or model is None or model.seq < own.seq:
                    continue
                bound = net.delay_max_ms + self.scenario.protocol.position_tolerance_ms
                skew = abs(rp.position_ms - re.position_ms)
                if skew > bound:
                    raise InvariantViolation(
                        f"@{now_ms}: position skew {skew} exceeds {bound}")


def check_run(scenario: Scenario, catalog: Catalog) -> Timeline:
    """Run a scenario with invariant checking; raises InvariantViolation."""
    checker = InvariantChecker(scenario, catalog)
    return run_scenario(scenario, catalog=catalog, observer=checker)


def minimize_scenario(scenario: Scenario, still_fails) -> Scenario:
    """Greedy shrink: drop events one at a time while the failure persists."""
    events = list(scenario.events)
    shrinking = True
    while shrinking:
        shrinking = False
        for i in range(len(events)):
            candidate = replace(scenario, events=tuple(events[:i] + events[i + 1:]))
            if still_fails(candidate):
                del events[i]
                shrinking = True
                break
    return replace(scenario, events=tuple(events))
