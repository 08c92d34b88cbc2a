"""Per-device playback bookkeeping and the earphone render function.

The rules, in order: a personal clip (picked by this device's user) always
preempts an eavesdropped one; clips are never mixed, so at most one clip is
audible at any instant; eavesdropped audio carries a reverb flag and plays
at the listener-chosen level; clips end by natural expiry with no message
required, since every device knows every clip's duration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .catalog import Catalog
from .errors import NotPlaying, UnknownClip
from .messages import Announce, ControlMessage, Start, Stop

DEFAULT_QUIET_GAIN = 0.5


class Level(enum.Enum):
    """Eavesdropping volume. Loud equals the personal-playback gain."""
    OFF = "off"
    QUIET = "quiet"
    LOUD = "loud"


def gain_for(level: Level, quiet_gain: float = DEFAULT_QUIET_GAIN) -> float:
    if level is Level.OFF:
        return 0.0
    if level is Level.QUIET:
        return quiet_gain
    return 1.0


class Source(enum.Enum):
    PERSONAL = "personal"
    EAVESDROPPED = "eavesdropped"


@dataclass(frozen=True)
class PlaybackRecord:
    """One playing clip: position 0 occurred at start_ms on the shared
    timeline (estimated, for peers). seq is the originator's sequence number."""
    clip_id: str
    start_ms: int
    seq: int

    def active_at(self, now_ms: int, catalog: Catalog) -> bool:
        return self.start_ms <= now_ms < self.start_ms + catalog.duration_ms(self.clip_id)


@dataclass(frozen=True)
class Silence:
    pass


@dataclass(frozen=True)
class Playing:
    clip_id: str
    position_ms: int
    gain: float
    source: Source
    reverb: bool


AudibleState = Silence | Playing

SILENCE = Silence()


def audible_to_wire(state: AudibleState) -> dict:
    if isinstance(state, Silence):
        return {"kind": "silence"}
    return {
        "kind": "playing",
        "clip_id": state.clip_id,
        "position_ms": state.position_ms,
        "gain": state.gain,
        "source": state.source.value,
        "reverb": state.reverb,
    }


def audible_from_wire(obj: dict) -> AudibleState:
    if obj["kind"] == "silence":
        return SILENCE
    return Playing(
        clip_id=obj["clip_id"],
        position_ms=obj["position_ms"],
        gain=obj["gain"],
        source=Source(obj["source"]),
        reverb=obj["reverb"],
    )


@dataclass(frozen=True)
class DeviceState:
    """One visitor device. A value: operations return updated copies."""
    device_id: str
    peer_id: str
    current_wall_id: str
    own: PlaybackRecord | None = None
    peer_model: PlaybackRecord | None = None
    level: Level = Level.QUIET
    next_send_seq: int = 1
    last_applied_peer_seq: int = 0
    tap_tip_expiry_ms: int | None = None
    last_announce_ms: int = 0


def initial_state(device_id: str, peer_id: str, catalog: Catalog) -> DeviceState:
    return DeviceState(device_id=device_id, peer_id=peer_id,
                       current_wall_id=catalog.first_wall_id())


def render(state: DeviceState, catalog: Catalog, now_ms: int,
           quiet_gain: float = DEFAULT_QUIET_GAIN) -> AudibleState:
    """What the earphone carries at now_ms. Pure: never mutates state.

    Personal playback wins outright; otherwise the peer's clip plays at the
    eavesdropping level (with the reverb mark that distinguishes it); Off or
    nothing active means silence.
    """
    own = state.own
    if own is not None:
        if catalog.clip(own.clip_id) is None:
            raise UnknownClip(own.clip_id)
        if own.active_at(now_ms, catalog):
            return Playing(own.clip_id, now_ms - own.start_ms, 1.0,
                           Source.PERSONAL, reverb=False)
    peer = state.peer_model
    if peer is not None and state.level is not Level.OFF:
        if catalog.clip(peer.clip_id) is None:
            raise UnknownClip(peer.clip_id)
        if peer.active_at(now_ms, catalog):
            return Playing(peer.clip_id, now_ms - peer.start_ms,
                           gain_for(state.level, quiet_gain),
                           Source.EAVESDROPPED, reverb=True)
    return SILENCE


def start_personal(state: DeviceState, catalog: Catalog, clip_id: str,
                   now_ms: int) -> tuple[DeviceState, ControlMessage]:
    """Begin a personal clip, replacing whatever was playing.

    Sharing needs no gesture of its own: the returned Start message is the
    side effect that lets the companion eavesdrop.
    """
    if catalog.clip(clip_id) is None:
        raise UnknownClip(clip_id)
    seq = state.next_send_seq
    new = replace(state,
                  own=PlaybackRecord(clip_id, now_ms, seq),
                  next_send_seq=seq + 1)
    msg = ControlMessage(sender=state.device_id, seq=seq, sent_at_ms=now_ms,
                         payload=Start(clip_id, 0))
    return new, msg


def stop_personal(state: DeviceState, catalog: Catalog,
                  now_ms: int) -> tuple[DeviceState, ControlMessage]:
    """Stop the active personal clip and emit a Stop for the peer."""
    if state.own is None or not state.own.active_at(now_ms, catalog):
        raise NotPlaying(state.device_id)
    seq = state.next_send_seq
    new = replace(state, own=None, next_send_seq=seq + 1)
    msg = ControlMessage(sender=state.device_id, seq=seq, sent_at_ms=now_ms,
                         payload=Stop(state.own.clip_id))
    return new, msg


def set_level(state: DeviceState, level: Level) -> DeviceState:
    """Change the eavesdropping volume. Listener-private: no message is sent
    and own playback is untouched."""
    return replace(state, level=level)
