import json
from pathlib import Path

import pytest

from taxiroll.config import resolve_map
from taxiroll.demand import DemandModel
from taxiroll.roadgraph import load_map

REPO_ROOT = Path(__file__).resolve().parents[1]


def make_line_graph(ids=(10, 20, 30, 40, 50)):
    """Bidirectional path graph: 10 <-> 20 <-> ... <-> 50."""
    edges = []
    for a, b in zip(ids, ids[1:]):
        edges += [{"from": a, "to": b}, {"from": b, "to": a}]
    doc = {
        "id": "line",
        "nodes": [{"id": n, "lon": float(n), "lat": 0.0} for n in ids],
        "edges": edges,
    }
    return load_map(json.dumps(doc))


def make_triangle_graph():
    """3-node one-way cycle A -> B -> C -> A."""
    doc = {
        "id": "tri",
        "nodes": [{"id": n, "lon": float(n), "lat": 0.0} for n in (1, 2, 3)],
        "edges": [
            {"from": 1, "to": 2},
            {"from": 2, "to": 3},
            {"from": 3, "to": 1},
        ],
    }
    return load_map(json.dumps(doc))


def make_ring_graph(n=12, chords=((0, 6), (3, 9))):
    """Bidirectional ring with a few chords; ids 100..100+n-1."""
    ids = [100 + i for i in range(n)]
    pairs = set()
    for i in range(n):
        pairs.add((ids[i], ids[(i + 1) % n]))
        pairs.add((ids[(i + 1) % n], ids[i]))
    for a, b in chords:
        pairs.add((ids[a], ids[b]))
        pairs.add((ids[b], ids[a]))
    doc = {
        "id": f"ring{n}",
        "nodes": [{"id": i, "lon": float(i), "lat": 0.0} for i in ids],
        "edges": [{"from": a, "to": b} for a, b in sorted(pairs)],
    }
    return load_map(json.dumps(doc))


@pytest.fixture(scope="session")
def midtown():
    return resolve_map("sf-midtown-42")


@pytest.fixture(scope="session")
def large_map():
    return resolve_map("sf-grid-large")


@pytest.fixture(scope="session")
def line5():
    return make_line_graph()


@pytest.fixture(scope="session")
def ring12():
    return make_ring_graph()


@pytest.fixture()
def low_model():
    return DemandModel(arrival_rate=0.05)


@pytest.fixture()
def medium_model():
    return DemandModel(arrival_rate=0.15)


@pytest.fixture(scope="session")
def testset_dir():
    path = REPO_ROOT / "testset"
    if not path.exists():
        pytest.skip("bundled test sets not generated")
    return path
