"""Property-based checks over the core invariants."""
import json

from hypothesis import given, settings
from hypothesis import strategies as st

from taxiroll.assignment import auction_assign
from taxiroll.fleet import AgentAction
from taxiroll.llm.policy import parse_action
from taxiroll.llm.prompts import render_action
from taxiroll.roadgraph import load_map, shortest_path

matrices = st.integers(1, 5).flatmap(
    lambda na: st.integers(1, 5).flatmap(
        lambda nr: st.lists(
            st.lists(st.integers(0, 15), min_size=nr, max_size=nr),
            min_size=na,
            max_size=na,
        )
    )
)


@given(matrices, st.integers(2, 9))
@settings(max_examples=60, deadline=None)
def test_auction_pairing_scale_invariant(mat, k):
    scaled = [[k * v for v in row] for row in mat]
    assert auction_assign(mat).pairs == auction_assign(scaled).pairs


@given(st.integers(0, 10**10), st.booleans(), st.text(max_size=80))
@settings(max_examples=80, deadline=None)
def test_parse_render_round_trip_with_preamble(node, pickup, preamble):
    action = AgentAction(node, pickup)
    text = preamble.replace("(", "[") + " " + render_action(action)
    parsed = parse_action(text)
    assert parsed is not None
    assert (parsed.pickup, parsed.next_position) == (pickup, node)


@st.composite
def digraphs(draw):
    n = draw(st.integers(2, 12))
    ids = sorted(draw(st.sets(st.integers(1, 500), min_size=n, max_size=n)))
    pairs = draw(
        st.sets(
            st.tuples(st.sampled_from(ids), st.sampled_from(ids)).filter(
                lambda p: p[0] != p[1]
            ),
            max_size=4 * n,
        )
    )
    doc = {
        "id": "h",
        "nodes": [{"id": i, "lon": 0.0, "lat": 0.0} for i in ids],
        "edges": [{"from": a, "to": b} for a, b in sorted(pairs)],
    }
    return load_map(json.dumps(doc))


@given(digraphs(), st.randoms(use_true_random=False))
@settings(max_examples=50, deadline=None)
def test_routes_walk_real_edges_and_match_table(g, rnd):
    ids = list(g.node_ids)
    i, j = rnd.choice(ids), rnd.choice(ids)
    route = shortest_path(g, i, j)
    if route is None:
        assert g.paths.hops(i, j) == -1
        return
    assert route[0] == i and route[-1] == j
    for a, b in zip(route, route[1:]):
        assert b in g.out_edges[a]
    assert g.paths.hops(i, j) == len(route) - 1
    assert g.paths.route(i, j) == route
