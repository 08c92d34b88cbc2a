"""Brute-force re-simulation used to cross-check the event-driven engine.

At every sampling step the oracle recomputes each device's state from the
complete event and delivery history — no incremental state is carried
between steps. It shares only the seeded network (so both sides see the
same delivery schedule) and the catalog; playback, message application,
and render rules are reimplemented here from first principles.
"""

from __future__ import annotations

from dataclasses import dataclass

from .audio import SILENCE, AudibleState, Level, Playing, Silence, Source, gain_for
from .catalog import Catalog, Hit, load_catalog_file, resolve_tap
from .engine import Timeline, collapse, is_continuation
from .messages import Announce, ControlMessage, Start, Stop
from .scenario import (
    DEVICE_IDS,
    Scenario,
    ScenarioEvent,
    SetLevel,
    StopPersonal,
    Tap,
    validate_against_catalog,
)
from .simnet import SimNet

_PEER = {"A": "B", "B": "A"}


@dataclass(frozen=True)
class _Send:
    at_ms: int
    msg: ControlMessage


def _reconstruct_sends(scenario: Scenario, catalog: Catalog) -> list[_Send]:
    """Replay send occasions in the engine's global order: scenario events
    before announce timers at one instant, devices in fixed order for timers."""
    occasions: list[tuple[int, int, int, str, object]] = []
    for idx, ev in enumerate(scenario.events):
        occasions.append((ev.at_ms, 1, idx, ev.device, ev))
    interval = scenario.protocol.announce_interval_ms
    t = interval
    while t <= scenario.end_ms:
        for slot, device in enumerate(DEVICE_IDS):
            occasions.append((t, 2, slot, device, "announce"))
        t += interval
    occasions.sort(key=lambda o: (o[0], o[1], o[2]))

    own: dict[str, tuple[str, int] | None] = {d: None for d in DEVICE_IDS}
    next_seq = {d: 1 for d in DEVICE_IDS}
    sends: list[_Send] = []

    def active(device: str, now: int) -> bool:
        record = own[device]
        return record is not None and \
            record[1] <= now < record[1] + catalog.duration_ms(record[0])

    for at_ms, _, _, device, item in occasions:
        if item == "announce":
            if active(device, at_ms):
                clip_id, started = own[device]
                payload = Announce(clip_id, at_ms - started)
            else:
                payload = Announce()
        elif isinstance(item.action, Tap):
            outcome = resolve_tap(catalog.wall(item.action.wall_id),
                                  (item.action.x, item.action.y), at_ms)
            if not isinstance(outcome, Hit):
                continue
            own[device] = (outcome.clip_id, at_ms)
            payload = Start(outcome.clip_id, 0)
        elif isinstance(item.action, StopPersonal):
            if not active(device, at_ms):
                continue
            payload = Stop(own[device][0])
            own[device] = None
        else:
            continue  # SetLevel / SwitchWall never transmit
        seq = next_seq[device]
        next_seq[device] += 1
        sends.append(_Send(at_ms, ControlMessage(device, seq, at_ms, payload)))
    return sends


def _state_at(scenario: Scenario, catalog: Catalog, device: str, now: int,
              deliveries: list[tuple[int, int, str, ControlMessage]],
              config) -> tuple[tuple[str, int] | None, Level, tuple[str, int] | None]:
    """Recompute (own, level, peer_model) from the full history up to now."""
    own: tuple[str, int] | None = None
    level = Level.QUIET
    for ev in scenario.events:
        if ev.at_ms > now or ev.device != device:
            continue
        action = ev.action
        if isinstance(action, Tap):
            outcome = resolve_tap(catalog.wall(action.wall_id), (action.x, action.y),
                                  ev.at_ms)
            if isinstance(outcome, Hit):
                own = (outcome.clip_id, ev.at_ms)
        elif isinstance(action, StopPersonal):
            if own is not None and \
                    own[1] <= ev.at_ms < own[1] + catalog.duration_ms(own[0]):
                own = None
        elif isinstance(action, SetLevel):
            level = action.level

    best: tuple[int, int, str, ControlMessage] | None = None
    for deliver_at, _, recipient, msg in deliveries:
        if recipient != device or deliver_at > now:
            continue
        if best is None or msg.seq > best[3].seq:
            best = (deliver_at, 0, recipient, msg)
    peer: tuple[str, int] | None = None
    if best is not None:
        payload = best[3].payload
        if isinstance(payload, Start) or (isinstance(payload, Announce)
                                          and not payload.idle):
            peer = (payload.clip_id,
                    best[0] - payload.position_ms - config.latency_compensation_ms)
    return own, level, peer


def _sample(scenario: Scenario, catalog: Catalog, device: str, now: int,
            deliveries, quiet_gain: float) -> AudibleState:
    own, level, peer = _state_at(scenario, catalog, device, now, deliveries,
                                 scenario.protocol)

    def playing(record, gain, source, reverb):
        return Playing(record[0], now - record[1], gain, source, reverb)

    def active(record):
        return record is not None and \
            record[1] <= now < record[1] + catalog.duration_ms(record[0])

    if active(own):
        return playing(own, 1.0, Source.PERSONAL, False)
    if scenario.mode == "openair":
        peer_own, _, _ = _state_at(scenario, catalog, _PEER[device], now,
                                   deliveries, scenario.protocol)
        if active(peer_own):
            return playing(peer_own, 1.0, Source.EAVESDROPPED, False)
        return SILENCE
    if level is not Level.OFF and active(peer):
        return playing(peer, gain_for(level, quiet_gain), Source.EAVESDROPPED, True)
    return SILENCE


def oracle_run(scenario: Scenario, step_ms: int = 10,
               catalog: Catalog | None = None,
               quiet_gain: float = 0.5) -> Timeline:
    """Sample the brute-force model every step_ms and emit change points."""
    if step_ms <= 0:
        raise ValueError("step_ms must be positive")
    if catalog is None:
        catalog = load_catalog_file(scenario.catalog_ref)
    validate_against_catalog(scenario, catalog)

    timeline = Timeline.fresh(scenario.end_ms)

    net = SimNet(scenario.network)
    deliveries: list[tuple[int, int, str, ControlMessage]] = []
    if scenario.mode == "eavesdrop":
        insert = 0
        for send in _reconstruct_sends(scenario, catalog):
            timeline.sent.append((send.at_ms, send.msg))
            events = net.send(send.msg, send.at_ms, _PEER[send.msg.sender])
            if not events:
                timeline.dropped.append((send.at_ms, send.msg))
            for ev in events:
                deliveries.append((ev.deliver_at_ms, insert, ev.recipient, ev.msg))
                insert += 1
        deliveries.sort(key=lambda d: (d[0], d[1]))
        timeline.delivered.extend(
            (t, recipient, msg) for t, _, recipient, msg in deliveries
            if t <= scenario.end_ms)

    prev = {d: (0, SILENCE) for d in DEVICE_IDS}
    for now in range(0, scenario.end_ms + 1, step_ms):
        for device in DEVICE_IDS:
            state = _sample(scenario, catalog, device, now, deliveries, quiet_gain)
            prev_t, prev_state = prev[device]
            if not is_continuation(prev_state, state, now - prev_t):
                timeline.append(device, now, state)
            prev[device] = (now, state)
    return timeline


def _at_sampling_resolution(points, step_ms: int):
    """Collapse change points to what a step_ms sampler can observe: at most
    one per sampling cell (a sample at the cell boundary sees only the final
    state of the cell), and no entry that merely resumes the previous
    surviving trajectory (e.g. an instantaneous start+stop blip)."""
    cells = []
    for t, s in collapse(points):
        boundary = -(-t // step_ms) * step_ms  # first sample time >= t
        if cells and -(-cells[-1][0] // step_ms) * step_ms == boundary:
            cells[-1] = (t, s)
        else:
            cells.append((t, s))
    out = []
    for t, s in cells:
        if out and is_continuation(out[-1][1], s, t - out[-1][0]):
            continue
        out.append((t, s))
    return out


def points_agree(exact, observed, tolerance_ms: int, label: str = "") -> list[str]:
    """Pair an exact change-point list against an observed one whose entries
    may lag by up to tolerance_ms (e.g. live frames detected on a tick)."""
    problems = []

    def sweep(points):
        out = []
        for t, s in collapse(points):
            if out and is_continuation(out[-1][1], s, t - out[-1][0]):
                continue
            out.append((t, s))
        return out

    exact = sweep(exact)
    observed = sweep(observed)
    if len(exact) != len(observed):
        return [f"{label}: {len(exact)} exact change points vs {len(observed)} observed"]
    for (te, se), (to, so) in zip(exact, observed):
        dt = to - te
        if not (0 <= dt <= tolerance_ms):
            problems.append(f"{label}: change at {te} observed at {to}")
            continue
        if isinstance(se, Silence) != isinstance(so, Silence):
            problems.append(f"{label}@{te}: kind mismatch {se} vs {so}")
        elif isinstance(se, Playing):
            if (se.clip_id != so.clip_id or se.gain != so.gain
                    or se.source != so.source or se.reverb != so.reverb
                    or so.position_ms != se.position_ms + dt):
                problems.append(f"{label}@{te}: {se} vs {so}")
    return problems


def timelines_agree(engine_tl: Timeline, oracle_tl: Timeline,
                    step_ms: int) -> list[str]:
    """Compare change points within one sampling step; returns mismatch
    descriptions (empty means agreement). Segments narrower than the step
    cannot be observed by sampling, so both sides are first reduced to
    sampling resolution; surviving points must pair up within one step with
    positions consistent under the time offset."""
    problems = []
    if engine_tl.to_dict()["messages"] != oracle_tl.to_dict()["messages"]:
        problems.append("message logs differ")
    for device in DEVICE_IDS:
        eng = _at_sampling_resolution(engine_tl.devices[device], step_ms)
        orc = _at_sampling_resolution(oracle_tl.devices[device], step_ms)
        if len(eng) != len(orc):
            problems.append(
                f"{device}: {len(eng)} engine change points vs {len(orc)} oracle")
            continue
        for (te, se), (to, so) in zip(eng, orc):
            dt = to - te
            if not (0 <= dt <= step_ms):
                problems.append(f"{device}: change at {te} vs oracle {to}")
                continue
            if isinstance(se, Silence) != isinstance(so, Silence):
                problems.append(f"{device}@{te}: kind mismatch {se} vs {so}")
            elif isinstance(se, Playing):
                if (se.clip_id != so.clip_id or se.gain != so.gain
                        or se.source != so.source or se.reverb != so.reverb
                        or so.position_ms != se.position_ms + dt):
                    problems.append(f"{device}@{te}: {se} vs {so}")
    return problems
