"""Shared content catalog: rooms, wall imagemaps, polygon targets, clips.

The catalog is the content both paired devices hold. It is immutable after
load, so any number of readers may share one instance. Hit-testing uses the
even-odd fill rule with boundary points counting as inside; overlapping
targets resolve to the first one in declared wall order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import OutOfBounds, ParseError, ValidationError

Point = tuple[float, float]
Polygon = tuple[Point, ...]

DEFAULT_TIP_DURATION_MS = 2000


@dataclass(frozen=True)
class Clip:
    clip_id: str
    duration_ms: int
    title: str
    transcript: str | None = None


@dataclass(frozen=True)
class Target:
    target_id: str
    clip_id: str
    polygon: Polygon


@dataclass(frozen=True)
class Wall:
    wall_id: str
    room_id: str
    image_ref: str
    width_px: int
    height_px: int
    targets: tuple[Target, ...]


@dataclass(frozen=True)
class Room:
    room_id: str
    name: str
    wall_ids: tuple[str, ...]


@dataclass
class Catalog:
    """Validated content catalog plus its canonical content checksum."""

    rooms: tuple[Room, ...]
    walls: tuple[Wall, ...]
    clips: tuple[Clip, ...]
    checksum: str
    _walls_by_id: dict[str, Wall] = field(init=False, repr=False)
    _clips_by_id: dict[str, Clip] = field(init=False, repr=False)

    def __post_init__(self):
        self._walls_by_id = {w.wall_id: w for w in self.walls}
        self._clips_by_id = {c.clip_id: c for c in self.clips}

    def wall(self, wall_id: str) -> Wall | None:
        return self._walls_by_id.get(wall_id)

    def clip(self, clip_id: str) -> Clip | None:
        return self._clips_by_id.get(clip_id)

    def duration_ms(self, clip_id: str) -> int:
        clip = self._clips_by_id.get(clip_id)
        if clip is None:
            raise KeyError(clip_id)
        return clip.duration_ms

    def first_wall_id(self) -> str:
        return self.rooms[0].wall_ids[0]

    def __eq__(self, other):
        if not isinstance(other, Catalog):
            return NotImplemented
        return (self.rooms, self.walls, self.clips) == (other.rooms, other.walls, other.clips)


@dataclass(frozen=True)
class Hit:
    target_id: str
    clip_id: str


@dataclass(frozen=True)
class Miss:
    tip_outlines: tuple[Polygon, ...]
    tip_expiry_ms: int


TapOutcome = Hit | Miss


# ---------------------------------------------------------------------------
# geometry

def _cross(ox, oy, ax, ay, bx, by):
    # z of (a - o) x (b - o); exact for integer-valued inputs
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _cross(ax, ay, bx, by, px, py) != 0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def point_in_polygon(point: Point, polygon: Polygon) -> bool:
    """Even-odd containment; points on an edge or vertex count as inside."""
    px, py = point
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        if _on_segment(px, py, ax, ay, bx, by):
            return True
    inside = False
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        if (ay > py) != (by > py):
            # px < ax + (py-ay)*(bx-ax)/(by-ay), cross-multiplied to avoid
            # the division (keeps integer inputs exact)
            lhs = (px - ax) * (by - ay)
            rhs = (py - ay) * (bx - ax)
            if lhs < rhs if by > ay else lhs > rhs:
                inside = not inside
    return inside


def _segments_touch(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    """True when closed segments p1p2 and p3p4 share at least one point."""
    d1 = _cross(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _cross(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _cross(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _cross(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > 0) != (d2 > 0) and d1 != 0 and d2 != 0
            and (d3 > 0) != (d4 > 0) and d3 != 0 and d4 != 0):
        return True
    if d1 == 0 and _on_segment(p1[0], p1[1], p3[0], p3[1], p4[0], p4[1]):
        return True
    if d2 == 0 and _on_segment(p2[0], p2[1], p3[0], p3[1], p4[0], p4[1]):
        return True
    if d3 == 0 and _on_segment(p3[0], p3[1], p1[0], p1[1], p2[0], p2[1]):
        return True
    if d4 == 0 and _on_segment(p4[0], p4[1], p1[0], p1[1], p2[0], p2[1]):
        return True
    return False


def polygon_area2(polygon: Polygon) -> float:
    """Twice the signed shoelace area."""
    total = 0.0
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        total += ax * by - bx * ay
    return total


def check_simple_polygon(polygon: Polygon, path: str) -> None:
    """Reject degenerate polygons: <3 points, zero-length edges, spikes,
    zero area, or any contact between non-adjacent edges."""
    n = len(polygon)
    if n < 3:
        raise ValidationError("polygon needs at least 3 points", path)
    for i in range(n):
        if polygon[i] == polygon[(i + 1) % n]:
            raise ValidationError("polygon has a zero-length edge", path)
    for i in range(n):
        a, b, c = polygon[i - 1], polygon[i], polygon[(i + 1) % n]
        if _cross(b[0], b[1], a[0], a[1], c[0], c[1]) == 0:
            # collinear vertex: straight-through is tolerated, a spike
            # (edge doubling back on itself) is not
            dot = (a[0] - b[0]) * (c[0] - b[0]) + (a[1] - b[1]) * (c[1] - b[1])
            if dot > 0:
                raise ValidationError("polygon doubles back on itself", path)
    if polygon_area2(polygon) == 0:
        raise ValidationError("polygon has zero area", path)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges legitimately share a vertex
            if _segments_touch(*edges[i], *edges[j]):
                raise ValidationError("polygon is self-intersecting", path)


# ---------------------------------------------------------------------------
# hit testing

def hit_test(wall: Wall, point: Point) -> Target | None:
    """First target (declared wall order) whose polygon contains the point."""
    x, y = point
    if not (0 <= x <= wall.width_px and 0 <= y <= wall.height_px):
        raise OutOfBounds(f"point {point} outside wall {wall.wall_id} "
                          f"({wall.width_px}x{wall.height_px})")
    for target in wall.targets:
        if point_in_polygon(point, target.polygon):
            return target
    return None


def resolve_tap(wall: Wall, point: Point, now_ms: int,
                tip_duration_ms: int = DEFAULT_TIP_DURATION_MS) -> TapOutcome:
    """Hit when a target contains the point, else Miss carrying all target
    outlines on this wall ("tap tips") and their expiry time."""
    target = hit_test(wall, point)
    if target is not None:
        return Hit(target_id=target.target_id, clip_id=target.clip_id)
    outlines = tuple(t.polygon for t in wall.targets)
    return Miss(tip_outlines=outlines, tip_expiry_ms=now_ms + tip_duration_ms)


# ---------------------------------------------------------------------------
# load / serialize / checksum

def canonical_checksum(document: Any) -> str:
    """SHA-256 of the sorted-key, no-whitespace JSON rendering, as lowercase hex."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"),
                           ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(obj: dict, key: str, kinds, path: str):
    if key not in obj:
        raise ValidationError(f"missing required field '{key}'", path)
    value = obj[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ValidationError(f"field '{key}' has wrong type", path)
    return value


def _parse_point(raw, path: str) -> Point:
    if (not isinstance(raw, list) or len(raw) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)):
        raise ValidationError("polygon point must be [x, y]", path)
    return (float(raw[0]), float(raw[1]))


def load_catalog(source: bytes | str) -> Catalog:
    """Parse, validate, and index a catalog document.

    Raises ParseError for malformed JSON and ValidationError (with a path)
    for any invariant breach: non-positive duration, dangling clip or wall
    reference, degenerate polygon, out-of-bounds point, duplicate id.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        document = json.loads(source)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"catalog is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ParseError("catalog document must be a JSON object")
    return catalog_from_document(document)


def catalog_from_document(document: dict) -> Catalog:
    checksum = canonical_checksum(document)

    raw_clips = _require(document, "clips", list, "catalog")
    clips = []
    seen_clips: set[str] = set()
    for i, raw in enumerate(raw_clips):
        path = f"clips[{i}]"
        if not isinstance(raw, dict):
            raise ValidationError("clip must be an object", path)
        clip_id = _require(raw, "clip_id", str, path)
        duration = _require(raw, "duration_ms", int, path)
        title = _require(raw, "title", str, path)
        transcript = raw.get("transcript")
        if transcript is not None and not isinstance(transcript, str):
            raise ValidationError("transcript must be a string", path)
        if duration <= 0:
            raise ValidationError("duration_ms must be positive", f"{path}.duration_ms")
        if clip_id in seen_clips:
            raise ValidationError(f"duplicate clip_id '{clip_id}'", path)
        seen_clips.add(clip_id)
        clips.append(Clip(clip_id, duration, title, transcript))

    raw_walls = _require(document, "walls", list, "catalog")
    walls = []
    seen_walls: set[str] = set()
    seen_targets: set[str] = set()
    for i, raw in enumerate(raw_walls):
        path = f"walls[{i}]"
        if not isinstance(raw, dict):
            raise ValidationError("wall must be an object", path)
        wall_id = _require(raw, "wall_id", str, path)
        room_id = _require(raw, "room_id", str, path)
        image_ref = _require(raw, "image_ref", str, path)
        width = _require(raw, "width_px", int, path)
        height = _require(raw, "height_px", int, path)
        if width <= 0 or height <= 0:
            raise ValidationError("wall dimensions must be positive", path)
        if wall_id in seen_walls:
            raise ValidationError(f"duplicate wall_id '{wall_id}'", path)
        seen_walls.add(wall_id)
        targets = []
        for j, rawt in enumerate(_require(raw, "targets", list, path)):
            tpath = f"{path}.targets[{j}]"
            if not isinstance(rawt, dict):
                raise ValidationError("target must be an object", tpath)
            target_id = _require(rawt, "target_id", str, tpath)
            clip_id = _require(rawt, "clip_id", str, tpath)
            raw_poly = _require(rawt, "polygon", list, tpath)
            polygon = tuple(_parse_point(p, f"{tpath}.polygon[{k}]")
                            for k, p in enumerate(raw_poly))
            check_simple_polygon(polygon, f"{tpath}.polygon")
            for k, (x, y) in enumerate(polygon):
                if not (0 <= x <= width and 0 <= y <= height):
                    raise ValidationError("point outside wall image",
                                          f"{tpath}.polygon[{k}]")
            if clip_id not in seen_clips:
                raise ValidationError(f"unknown clip_id '{clip_id}'", f"{tpath}.clip_id")
            if target_id in seen_targets:
                raise ValidationError(f"duplicate target_id '{target_id}'", tpath)
            seen_targets.add(target_id)
            targets.append(Target(target_id, clip_id, polygon))
        walls.append(Wall(wall_id, room_id, image_ref, width, height, tuple(targets)))

    raw_rooms = _require(document, "rooms", list, "catalog")
    if not raw_rooms:
        raise ValidationError("catalog must contain at least one room", "rooms")
    rooms = []
    seen_rooms: set[str] = set()
    referenced: set[str] = set()
    for i, raw in enumerate(raw_rooms):
        path = f"rooms[{i}]"
        if not isinstance(raw, dict):
            raise ValidationError("room must be an object", path)
        room_id = _require(raw, "room_id", str, path)
        name = _require(raw, "name", str, path)
        wall_ids = _require(raw, "walls", list, path)
        if room_id in seen_rooms:
            raise ValidationError(f"duplicate room_id '{room_id}'", path)
        seen_rooms.add(room_id)
        if not wall_ids:
            raise ValidationError("room must list at least one wall", path)
        for j, wid in enumerate(wall_ids):
            wpath = f"{path}.walls[{j}]"
            if not isinstance(wid, str):
                raise ValidationError("wall reference must be a string", wpath)
            if wid not in seen_walls:
                raise ValidationError(f"unknown wall_id '{wid}'", wpath)
            if wid in referenced:
                raise ValidationError(f"wall_id '{wid}' referenced twice", wpath)
            referenced.add(wid)
        rooms.append(Room(room_id, name, tuple(wall_ids)))

    for i, wall in enumerate(walls):
        if wall.room_id not in seen_rooms:
            raise ValidationError(f"unknown room_id '{wall.room_id}'", f"walls[{i}].room_id")
        room = next(r for r in rooms if r.room_id == wall.room_id)
        if wall.wall_id not in room.wall_ids:
            raise ValidationError("wall not listed by its own room", f"walls[{i}]")

    return Catalog(tuple(rooms), tuple(walls), tuple(clips), checksum)


def load_catalog_file(path) -> Catalog:
    with open(path, "rb") as fh:
        return load_catalog(fh.read())


def catalog_to_document(catalog: Catalog) -> dict:
    """Rebuild the JSON document shape from a validated catalog."""
    def point(p: Point):
        return [p[0], p[1]]

    return {
        "rooms": [
            {"room_id": r.room_id, "name": r.name, "walls": list(r.wall_ids)}
            for r in catalog.rooms
        ],
        "walls": [
            {
                "wall_id": w.wall_id,
                "room_id": w.room_id,
                "image_ref": w.image_ref,
                "width_px": w.width_px,
                "height_px": w.height_px,
                "targets": [
                    {
                        "target_id": t.target_id,
                        "clip_id": t.clip_id,
                        "polygon": [point(p) for p in t.polygon],
                    }
                    for t in w.targets
                ],
            }
            for w in catalog.walls
        ],
        "clips": [
            {
                "clip_id": c.clip_id,
                "duration_ms": c.duration_ms,
                "title": c.title,
                **({"transcript": c.transcript} if c.transcript is not None else {}),
            }
            for c in catalog.clips
        ],
    }


def serialize_catalog(catalog: Catalog) -> bytes:
    return json.dumps(catalog_to_document(catalog), indent=2,
                      ensure_ascii=False).encode("utf-8")
