"""Event-driven scenario execution producing audible-state timelines.

One run processes scenario events, network deliveries, announce timers, and
clip-expiry boundaries in a single global time order. Ties at one instant
resolve deliveries first, then scenario events, then timers, then insertion
order — a fixed total order, so a run is a pure function of (scenario,
seed). Timelines record change points, not sampled frames.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from typing import Callable

from . import audio
from .audio import (
    SILENCE,
    AudibleState,
    DeviceState,
    Level,
    Playing,
    Silence,
    Source,
    audible_to_wire,
)
from .catalog import Catalog, Miss, load_catalog_file, resolve_tap
from .errors import InvalidScenario, NotPlaying
from .messages import ControlMessage, message_to_wire
from .protocol import due_announce, on_receive
from .scenario import (
    DEVICE_IDS,
    Scenario,
    SetLevel,
    StopPersonal,
    SwitchWall,
    Tap,
    validate_against_catalog,
)
from .simnet import DeliveryEvent, SimNet

# tie-break ranks at one instant
_RANK_DELIVERY = 0
_RANK_EVENT = 1
_RANK_TIMER = 2
_RANK_BOUNDARY = 3

Observer = Callable[[int, dict[str, DeviceState], dict[str, AudibleState]], None]


@dataclass
class Timeline:
    """Per-device audible change points plus the message log of a run."""

    devices: dict[str, list[tuple[int, AudibleState]]]
    sent: list[tuple[int, ControlMessage]] = field(default_factory=list)
    delivered: list[tuple[int, str, ControlMessage]] = field(default_factory=list)
    dropped: list[tuple[int, ControlMessage]] = field(default_factory=list)
    end_ms: int = 0

    @classmethod
    def fresh(cls, end_ms: int) -> "Timeline":
        return cls(devices={d: [(0, SILENCE)] for d in DEVICE_IDS}, end_ms=end_ms)

    def append(self, device: str, at_ms: int, state: AudibleState) -> None:
        self.devices[device].append((at_ms, state))

    def segments(self, device: str) -> list[tuple[int, int, AudibleState]]:
        """Half-open [start, end) spans covering [0, end_ms]."""
        points = collapse(self.devices[device])
        spans = []
        for i, (t, state) in enumerate(points):
            end = points[i + 1][0] if i + 1 < len(points) else self.end_ms
            if end > t:
                spans.append((t, end, state))
        return spans

    def to_dict(self) -> dict:
        return {
            "end_ms": self.end_ms,
            "devices": {
                d: [{"t_ms": t, "state": audible_to_wire(s)} for t, s in pts]
                for d, pts in self.devices.items()
            },
            "messages": {
                "sent": [{"t_ms": t, "msg": message_to_wire(m)} for t, m in self.sent],
                "delivered": [
                    {"t_ms": t, "recipient": r, "msg": message_to_wire(m)}
                    for t, r, m in self.delivered
                ],
                "dropped": [{"t_ms": t, "msg": message_to_wire(m)} for t, m in self.dropped],
            },
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def jsonl_lines(self) -> list[str]:
        entries = []
        for device, points in sorted(self.devices.items()):
            for idx, (t, state) in enumerate(points):
                entries.append((t, device, idx, state))
        entries.sort(key=lambda e: (e[0], e[1], e[2]))
        return [
            json.dumps({"t_ms": t, "device": d, "state": audible_to_wire(s)},
                       sort_keys=True)
            for t, d, _, s in entries
        ]


def collapse(points: list[tuple[int, AudibleState]]) -> list[tuple[int, AudibleState]]:
    """Drop zero-duration entries: for equal times keep only the last state."""
    out: list[tuple[int, AudibleState]] = []
    for t, state in points:
        if out and out[-1][0] == t:
            out[-1] = (t, state)
        else:
            out.append((t, state))
    return out


def is_continuation(prev: AudibleState, cur: AudibleState, dt: int) -> bool:
    """True when cur is prev advanced dt milliseconds with nothing else
    changed; anything else is a change point."""
    if isinstance(prev, Silence) and isinstance(cur, Silence):
        return True
    if isinstance(prev, Playing) and isinstance(cur, Playing):
        return (prev.clip_id == cur.clip_id and prev.gain == cur.gain
                and prev.source == cur.source and prev.reverb == cur.reverb
                and cur.position_ms == prev.position_ms + dt)
    return False


def render_for_mode(mode: str, devices: dict[str, DeviceState], device_id: str,
                     catalog: Catalog, now_ms: int, quiet_gain: float) -> AudibleState:
    state = devices[device_id]
    if mode == "eavesdrop":
        return audio.render(state, catalog, now_ms, quiet_gain)
    # open air: the companion's speaker is idealized as always audible to
    # both at full gain, no reverb mark, regardless of eavesdrop level
    if state.own is not None and state.own.active_at(now_ms, catalog):
        return Playing(state.own.clip_id, now_ms - state.own.start_ms, 1.0,
                       Source.PERSONAL, reverb=False)
    peer_own = devices[state.peer_id].own
    if peer_own is not None and peer_own.active_at(now_ms, catalog):
        return Playing(peer_own.clip_id, now_ms - peer_own.start_ms, 1.0,
                       Source.EAVESDROPPED, reverb=False)
    return SILENCE


def run_scenario(scenario: Scenario, catalog: Catalog | None = None,
                 observer: Observer | None = None,
                 quiet_gain: float = audio.DEFAULT_QUIET_GAIN) -> Timeline:
    """Execute a scenario deterministically and return its Timeline."""
    if catalog is None:
        catalog = load_catalog_file(scenario.catalog_ref)
    validate_against_catalog(scenario, catalog)
    if scenario.mode not in ("eavesdrop", "openair"):
        raise InvalidScenario(f"unknown mode {scenario.mode!r}")
    eavesdrop = scenario.mode == "eavesdrop"

    net = SimNet(scenario.network)
    proto = scenario.protocol
    devices = {d: audio.initial_state(d, peer, catalog)
               for d, peer in zip(DEVICE_IDS, reversed(DEVICE_IDS))}
    timeline = Timeline.fresh(scenario.end_ms)
    # the last change point per device; a refresh only records a new one when
    # the rendered state is not that basis advanced by the elapsed time
    basis: dict[str, tuple[int, AudibleState]] = {d: (0, SILENCE) for d in DEVICE_IDS}

    heap: list[tuple[int, int, int, object]] = []
    counter = 0
    scheduled_boundaries: set[int] = set()

    def push(at_ms: int, rank: int, item) -> None:
        nonlocal counter
        heapq.heappush(heap, (at_ms, rank, counter, item))
        counter += 1

    def send(msg: ControlMessage, now_ms: int) -> None:
        timeline.sent.append((now_ms, msg))
        deliveries = net.send(msg, now_ms, devices[msg.sender].peer_id)
        if not deliveries:
            timeline.dropped.append((now_ms, msg))
        for ev in deliveries:
            push(ev.deliver_at_ms, _RANK_DELIVERY, ev)

    def refresh(now_ms: int) -> None:
        for device_id in DEVICE_IDS:
            state = render_for_mode(scenario.mode, devices, device_id, catalog,
                                    now_ms, quiet_gain)
            basis_t, basis_state = basis[device_id]
            if not is_continuation(basis_state, state, now_ms - basis_t):
                timeline.append(device_id, now_ms, state)
                basis[device_id] = (now_ms, state)
            if isinstance(state, Playing):
                ends_at = now_ms - state.position_ms + catalog.duration_ms(state.clip_id)
                if ends_at <= scenario.end_ms and ends_at not in scheduled_boundaries:
                    scheduled_boundaries.add(ends_at)
                    push(ends_at, _RANK_BOUNDARY, None)

    for ev in scenario.events:
        push(ev.at_ms, _RANK_EVENT, ev)
    if eavesdrop:
        for d in DEVICE_IDS:
            push(proto.announce_interval_ms, _RANK_TIMER, d)

    refresh(0)
    while heap:
        now_ms, rank, _, item = heapq.heappop(heap)
        if now_ms > scenario.end_ms:
            break
        if rank == _RANK_DELIVERY:
            delivery: DeliveryEvent = item
            devices[delivery.recipient] = on_receive(
                devices[delivery.recipient], delivery.msg, now_ms, catalog, proto)
            timeline.delivered.append((now_ms, delivery.recipient, delivery.msg))
        elif rank == _RANK_EVENT:
            _apply_event(item, devices, catalog, now_ms, send, eavesdrop)
        elif rank == _RANK_TIMER:
            device_id: str = item
            devices[device_id], msg = due_announce(devices[device_id], now_ms,
                                                   proto, catalog)
            if msg is not None:
                send(msg, now_ms)
            push(now_ms + proto.announce_interval_ms, _RANK_TIMER, device_id)
        # _RANK_BOUNDARY: no state change, just a render checkpoint
        refresh(now_ms)
        if observer is not None:
            observer(now_ms, dict(devices), dict(basis))
    return timeline


def _apply_event(ev, devices: dict[str, DeviceState], catalog: Catalog,
                 now_ms: int, send, eavesdrop: bool) -> None:
    state = devices[ev.device]
    action = ev.action
    if isinstance(action, Tap):
        wall = catalog.wall(action.wall_id)
        outcome = resolve_tap(wall, (action.x, action.y), now_ms)
        if isinstance(outcome, Miss):
            devices[ev.device] = replace(state, tap_tip_expiry_ms=outcome.tip_expiry_ms)
            return
        new_state, msg = audio.start_personal(state, catalog, outcome.clip_id, now_ms)
        devices[ev.device] = new_state
        if eavesdrop:
            send(msg, now_ms)
    elif isinstance(action, SetLevel):
        devices[ev.device] = audio.set_level(state, action.level)
    elif isinstance(action, SwitchWall):
        devices[ev.device] = replace(state, current_wall_id=action.wall_id)
    elif isinstance(action, StopPersonal):
        try:
            new_state, msg = audio.stop_personal(state, catalog, now_ms)
        except NotPlaying:
            return  # scripted stop on an idle device is a no-op
        devices[ev.device] = new_state
        if eavesdrop:
            send(msg, now_ms)


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class SharingStats:
    mutual_eavesdrop_fraction: float
    simultaneous_listening_ms: int
    eavesdrop_listen_ms: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "mutual_eavesdrop_fraction": self.mutual_eavesdrop_fraction,
            "simultaneous_listening_ms": self.simultaneous_listening_ms,
            "eavesdrop_listen_ms": dict(self.eavesdrop_listen_ms),
        }


def _level_spans(scenario: Scenario, device: str) -> list[tuple[int, int, Level]]:
    level = Level.QUIET
    spans = []
    cursor = 0
    for ev in scenario.events:
        if ev.device == device and isinstance(ev.action, SetLevel):
            if ev.at_ms > cursor:
                spans.append((cursor, ev.at_ms, level))
                cursor = ev.at_ms
            level = ev.action.level
    spans.append((cursor, scenario.end_ms, level))
    return spans


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def compute_stats(timeline: Timeline, scenario: Scenario) -> SharingStats:
    """Integrate the timeline: mutual-eavesdropping time share, time spent on
    the same clip simultaneously, and per-device eavesdropped listening."""
    end = scenario.end_ms
    levels_a = _level_spans(scenario, "A")
    levels_b = _level_spans(scenario, "B")
    mutual = 0
    for ta0, ta1, la in levels_a:
        if la is Level.OFF:
            continue
        for tb0, tb1, lb in levels_b:
            if lb is Level.OFF:
                continue
            mutual += _overlap((ta0, ta1), (tb0, tb1))
    fraction = mutual / end if end > 0 else 0.0

    seg_a = timeline.segments("A")
    seg_b = timeline.segments("B")
    simultaneous = 0
    for a0, a1, sa in seg_a:
        if not isinstance(sa, Playing):
            continue
        for b0, b1, sb in seg_b:
            if isinstance(sb, Playing) and sb.clip_id == sa.clip_id:
                simultaneous += _overlap((a0, a1), (b0, b1))

    listen = {}
    for device, segs in (("A", seg_a), ("B", seg_b)):
        listen[device] = sum(t1 - t0 for t0, t1, s in segs
                             if isinstance(s, Playing) and s.source is Source.EAVESDROPPED)
    return SharingStats(fraction, simultaneous, listen)
