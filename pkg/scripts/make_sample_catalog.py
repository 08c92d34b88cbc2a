#!/usr/bin/env python3
"""Regenerate src/guidebook/data/sample_catalog.json.

Deterministic: three rooms of a historic house, four walls each, 51 tappable
objects with one long story clip among the usual short descriptions.
"""

import json
import pathlib
import random
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from guidebook.catalog import load_catalog  # noqa: E402

ROOMS = [
    ("library", "Library"),
    ("drawing-room", "Drawing Room"),
    ("dining-room", "Dining Room"),
]
WALL_SIDES = ["north", "east", "south", "west"]

OBJECT_TITLES = [
    "Walnut panelling", "False books on the top shelf", "Globe on a mahogany stand",
    "Marble fireplace", "Portrait above the mantel", "Brass reading lamp",
    "Writing desk with secret drawer", "First-edition atlas", "Grandfather clock",
    "Leather armchair", "Bay window seat", "Carved ceiling rose",
    "Gilt mirror", "Silk damask curtains", "Grand piano",
    "Porcelain vase pair", "Crystal chandelier", "Needlepoint fire screen",
    "Card table", "Family miniatures", "Venetian glass sconces",
    "Landscape of the valley", "Rosewood cabinet", "Embroidered settee",
    "Tapestry of the hunt", "Ivory chess set", "Cloisonne incense burner",
    "Mantel clock with moon dial", "Watercolor of the gardens", "Japanned screen",
    "Mahogany dining table", "Set of twelve chairs", "Silver epergne",
    "Butler's tray", "Celadon dinner service", "Hunting scene panels",
    "Wine cooler", "Candelabra pair", "Sideboard with serpentine front",
    "Dumbwaiter door", "Portrait of the founder", "Pier glass",
    "Fruitwood tea caddy", "Cut-glass decanters", "Painted ceiling border",
    "Hidden service passage", "Bell pull", "Breakfront bookcase",
    "Stained glass transom", "Terrestrial telescope", "Ormolu inkstand",
]

STORY_TITLE = "The story of the two families"


def make_polygon(rng, x0, y0, cell_w, cell_h):
    """A convex target inside one layout cell; shape varies for texture."""
    margin = 14
    x1, y1 = x0 + margin, y0 + margin
    x2, y2 = x0 + cell_w - margin, y0 + cell_h - margin
    kind = rng.choice(["rect", "rect", "quad", "pent"])
    if kind == "rect":
        return [[x1, y1], [x2, y1], [x2, y2], [x1, y2]]
    if kind == "quad":
        inset = rng.randint(8, 24)
        return [[x1 + inset, y1], [x2, y1 + inset], [x2 - inset, y2], [x1, y2 - inset]]
    mx = (x1 + x2) // 2
    return [[mx, y1], [x2, y1 + (y2 - y1) // 3], [x2 - 20, y2], [x1 + 20, y2],
            [x1, y1 + (y2 - y1) // 3]]


def main():
    rng = random.Random(20020321)
    width, height = 1024, 768

    durations = [rng.randrange(5500, 27001, 100) for _ in range(51)]
    durations[17] = 59000  # the single long story clip
    titles = OBJECT_TITLES[:]
    titles[17] = STORY_TITLE

    # 51 targets over 12 walls: three walls carry five, the rest four
    per_wall = [4] * 12
    for i in (1, 5, 9):
        per_wall[i] = 5

    clips = []
    walls = []
    rooms = []
    obj = 0
    wall_no = 0
    for room_id, room_name in ROOMS:
        wall_ids = []
        for side in WALL_SIDES:
            wall_id = f"{room_id}-{side}"
            wall_ids.append(wall_id)
            count = per_wall[wall_no]
            cell_w = (width - 80) // count
            targets = []
            for k in range(count):
                clip_id = f"clip-{obj + 1:03d}"
                x0 = 40 + k * cell_w
                y0 = rng.choice([180, 240, 300])
                polygon = make_polygon(rng, x0, y0, cell_w - 10, 260)
                targets.append({
                    "target_id": f"{wall_id}-obj{k + 1}",
                    "clip_id": clip_id,
                    "polygon": polygon,
                })
                entry = {
                    "clip_id": clip_id,
                    "duration_ms": durations[obj],
                    "title": titles[obj],
                }
                if obj in (0, 17, 40):
                    entry["transcript"] = f"{titles[obj]}. {_blurb(rng)}"
                clips.append(entry)
                obj += 1
            walls.append({
                "wall_id": wall_id,
                "room_id": room_id,
                "image_ref": f"assets/walls/{wall_id}.png",
                "width_px": width,
                "height_px": height,
                "targets": targets,
            })
            wall_no += 1
        rooms.append({"room_id": room_id, "name": room_name, "walls": wall_ids})

    assert obj == 51, obj
    document = {"rooms": rooms, "walls": walls, "clips": clips}

    text = json.dumps(document, indent=2, ensure_ascii=False) + "\n"
    catalog = load_catalog(text)  # sanity: must validate
    assert len(catalog.clips) == 51
    out = pathlib.Path(__file__).resolve().parents[1] / "src/guidebook/data/sample_catalog.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(f"wrote {out} (checksum {catalog.checksum})")


def _blurb(rng):
    phrases = [
        "Acquired at auction in the twenties and restored twice since.",
        "A favorite of every docent who has worked in this room.",
        "Look closely at the maker's mark along the lower edge.",
    ]
    return rng.choice(phrases)


if __name__ == "__main__":
    main()
