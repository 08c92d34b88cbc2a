"""Control messages exchanged between paired devices, plus their wire form.

Devices hold identical content, so the wire carries only tiny playback
commands and state snapshots; there is deliberately no audio payload kind
and no remote-voice kind. One message per datagram, JSON text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ParseError

WIRE_KINDS = ("start", "stop", "announce")
WIRE_FIELDS = ("sender", "seq", "sent_at_ms", "kind", "clip_id", "position_ms")


@dataclass(frozen=True)
class Start:
    """Sender began playing clip_id at the given position (0 for a fresh tap)."""
    clip_id: str
    position_ms: int


@dataclass(frozen=True)
class Stop:
    """Sender stopped playing clip_id."""
    clip_id: str


@dataclass(frozen=True)
class Announce:
    """Self-contained snapshot of the sender's own playback; idle when clip_id
    is None. Idempotent: applying it twice is a no-op."""
    clip_id: str | None = None
    position_ms: int | None = None

    @property
    def idle(self) -> bool:
        return self.clip_id is None


Payload = Start | Stop | Announce


@dataclass(frozen=True)
class ControlMessage:
    sender: str
    seq: int
    sent_at_ms: int
    payload: Payload


@dataclass
class WireStats:
    """Counters for datagrams that could not be decoded into a message."""
    unknown_kind_dropped: int = 0


def message_to_wire(msg: ControlMessage) -> dict:
    obj = {"sender": msg.sender, "seq": msg.seq, "sent_at_ms": msg.sent_at_ms}
    p = msg.payload
    if isinstance(p, Start):
        obj["kind"] = "start"
        obj["clip_id"] = p.clip_id
        obj["position_ms"] = p.position_ms
    elif isinstance(p, Stop):
        obj["kind"] = "stop"
        obj["clip_id"] = p.clip_id
    elif isinstance(p, Announce):
        obj["kind"] = "announce"
        if not p.idle:
            obj["clip_id"] = p.clip_id
            obj["position_ms"] = p.position_ms
    else:  # pragma: no cover - payload union is closed
        raise TypeError(f"unknown payload {p!r}")
    return obj


def encode_message(msg: ControlMessage) -> str:
    return json.dumps(message_to_wire(msg), sort_keys=True, separators=(",", ":"))


def message_from_wire(obj: dict, stats: WireStats | None = None) -> ControlMessage | None:
    """Decode one datagram object. Unknown fields are ignored; an unknown kind
    drops the datagram (counted in stats) and returns None."""
    if not isinstance(obj, dict):
        raise ParseError("datagram must be a JSON object")
    try:
        sender = obj["sender"]
        seq = obj["seq"]
        sent_at = obj["sent_at_ms"]
        kind = obj["kind"]
    except KeyError as exc:
        raise ParseError(f"datagram missing field {exc}") from exc
    if not isinstance(sender, str) or not isinstance(seq, int) or not isinstance(sent_at, int):
        raise ParseError("datagram field has wrong type")
    if kind == "start":
        payload: Payload = Start(obj["clip_id"], int(obj["position_ms"]))
    elif kind == "stop":
        payload = Stop(obj["clip_id"])
    elif kind == "announce":
        clip_id = obj.get("clip_id")
        payload = Announce(clip_id, int(obj["position_ms"]) if clip_id is not None else None)
    else:
        if stats is not None:
            stats.unknown_kind_dropped += 1
        return None
    return ControlMessage(sender=sender, seq=seq, sent_at_ms=sent_at, payload=payload)


def decode_message(text: str | bytes, stats: WireStats | None = None) -> ControlMessage | None:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"datagram is not valid JSON: {exc}") from exc
    return message_from_wire(obj, stats)
