import json
import pathlib

import pytest

from guidebook.catalog import catalog_from_document

HERE = pathlib.Path(__file__).parent
SAMPLE_CATALOG_PATH = HERE.parent / "src" / "guidebook" / "data" / "sample_catalog.json"


def two_clip_document():
    """Minimal wall with two rectangular targets; c1 10 s, c2 27 s."""
    return {
        "rooms": [{"room_id": "r1", "name": "Room One", "walls": ["w1"]}],
        "walls": [{
            "wall_id": "w1",
            "room_id": "r1",
            "image_ref": "assets/w1.png",
            "width_px": 1000,
            "height_px": 800,
            "targets": [
                {"target_id": "t1", "clip_id": "c1",
                 "polygon": [[10, 10], [200, 10], [200, 200], [10, 200]]},
                {"target_id": "t2", "clip_id": "c2",
                 "polygon": [[300, 10], [500, 10], [500, 200], [300, 200]]},
            ],
        }],
        "clips": [
            {"clip_id": "c1", "duration_ms": 10000, "title": "First object"},
            {"clip_id": "c2", "duration_ms": 27000, "title": "Second object"},
        ],
    }


@pytest.fixture
def two_clip_doc():
    return two_clip_document()


@pytest.fixture
def two_clip_catalog():
    return catalog_from_document(two_clip_document())


@pytest.fixture
def sample_catalog_path():
    return SAMPLE_CATALOG_PATH


@pytest.fixture
def sample_catalog():
    with open(SAMPLE_CATALOG_PATH, "rb") as fh:
        return catalog_from_document(json.load(fh))


def write_catalog(tmp_path, document, name="catalog.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return path
