"""Keeping each device's model of its companion eventually consistent.

Datagrams may be lost, duplicated, or reordered, so every message is
idempotent and sequence-numbered: receivers apply a message only when its
seq exceeds the last applied one (last-writer-wins), and a periodic
Announce snapshot is the sole recovery mechanism — no ACKs, no
retransmission queues. The receiver estimates when the peer's clip started
as receive time minus the reported position, optionally shifted by a fixed
latency compensation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .audio import DeviceState, PlaybackRecord
from .catalog import Catalog
from .errors import UnknownClip, WrongSender
from .messages import (
    WIRE_FIELDS,
    WIRE_KINDS,
    Announce,
    ControlMessage,
    Start,
    Stop,
    WireStats,
    decode_message,
    encode_message,
    message_from_wire,
    message_to_wire,
)

__all__ = [
    "ProtocolConfig", "on_receive", "due_announce", "peer_divergence",
    "DirectionReport", "DivergenceReport", "ControlMessage", "Start", "Stop",
    "Announce", "WireStats", "encode_message", "decode_message",
    "message_to_wire", "message_from_wire", "WIRE_KINDS", "WIRE_FIELDS",
]


@dataclass(frozen=True)
class ProtocolConfig:
    announce_interval_ms: int = 1000
    latency_compensation_ms: int = 0
    position_tolerance_ms: int = 50

    def __post_init__(self):
        if self.announce_interval_ms <= 0:
            raise ValueError("announce_interval_ms must be positive")
        if self.latency_compensation_ms < 0 or self.position_tolerance_ms < 0:
            raise ValueError("latency compensation and tolerance must be non-negative")


DEFAULT_PROTOCOL = ProtocolConfig()


def on_receive(state: DeviceState, msg: ControlMessage, receive_ms: int,
               catalog: Catalog,
               config: ProtocolConfig = DEFAULT_PROTOCOL) -> DeviceState:
    """Apply one control message from the paired peer.

    Stale or duplicate messages (seq <= last applied) leave the state
    unchanged, which makes redelivery and reordering harmless.
    """
    if msg.sender != state.peer_id:
        raise WrongSender(f"{msg.sender!r} is not the paired peer {state.peer_id!r}")
    if msg.seq <= state.last_applied_peer_seq:
        return state

    payload = msg.payload
    if isinstance(payload, (Start, Announce)) and not (
            isinstance(payload, Announce) and payload.idle):
        if catalog.clip(payload.clip_id) is None:
            raise UnknownClip(payload.clip_id)
        start_ms = receive_ms - payload.position_ms - config.latency_compensation_ms
        peer_model = PlaybackRecord(payload.clip_id, start_ms, msg.seq)
    else:  # Stop, or Announce of idleness
        peer_model = None
    return replace(state, peer_model=peer_model, last_applied_peer_seq=msg.seq)


def due_announce(state: DeviceState, now_ms: int, config: ProtocolConfig,
                 catalog: Catalog) -> tuple[DeviceState, ControlMessage | None]:
    """Emit the periodic self-snapshot when the interval has elapsed.

    The snapshot fully describes own playback (clip + current position) or
    idleness, so a single surviving announce heals any amount of prior loss.
    Consumes a fresh seq when a message is produced.
    """
    if now_ms - state.last_announce_ms < config.announce_interval_ms:
        return state, None
    own = state.own
    if own is not None and own.active_at(now_ms, catalog):
        payload = Announce(own.clip_id, now_ms - own.start_ms)
    else:
        payload = Announce()
    seq = state.next_send_seq
    msg = ControlMessage(sender=state.device_id, seq=seq, sent_at_ms=now_ms,
                         payload=payload)
    new = replace(state, next_send_seq=seq + 1, last_announce_ms=now_ms)
    return new, msg


@dataclass(frozen=True)
class DirectionReport:
    """Does one device's peer_model agree with the companion's actual playback?

    matches is True when both sides are idle or both name the same clip;
    position_error_ms is filled only when both are active.
    """
    matches: bool
    position_error_ms: int | None = None


@dataclass(frozen=True)
class DivergenceReport:
    a_models_b: DirectionReport
    b_models_a: DirectionReport


def _direction(model: PlaybackRecord | None, actual: PlaybackRecord | None,
               catalog: Catalog, now_ms: int) -> DirectionReport:
    model_active = model is not None and model.active_at(now_ms, catalog)
    actual_active = actual is not None and actual.active_at(now_ms, catalog)
    if not model_active and not actual_active:
        return DirectionReport(matches=True)
    if model_active != actual_active or model.clip_id != actual.clip_id:
        return DirectionReport(matches=False)
    return DirectionReport(matches=True,
                           position_error_ms=abs(model.start_ms - actual.start_ms))


def peer_divergence(a: DeviceState, b: DeviceState, catalog: Catalog,
                    now_ms: int) -> DivergenceReport:
    """Test instrumentation: compare each device's peer_model against the
    companion's actual own playback at now_ms."""
    return DivergenceReport(
        a_models_b=_direction(a.peer_model, b.own, catalog, now_ms),
        b_models_a=_direction(b.peer_model, a.own, catalog, now_ms),
    )
