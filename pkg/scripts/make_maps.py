#!/usr/bin/env python3
"""Regenerate the bundled example maps (deterministic).

The 42-node map mirrors a small San-Francisco-like street fragment.  A set of
road segments and two source/target hop distances are pinned because test
fixtures and prompt examples rely on them; the generator asserts all of the
invariants below before writing anything:

  * 42 nodes / 125 directed edges, strongly connected
  * node 65293741 has out-edges exactly {65293743, 65318282, 1723738829}
  * hop distance 65328690 -> 65343958 is exactly 8
  * hop distance 65328690 -> 65303546 is exactly 7

The large map is a ~6x bigger one-way/two-way street grid used for the
scaled-up benchmark configuration.
"""
from __future__ import annotations

import json
import sys
from collections import deque
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "taxiroll" / "data" / "maps"

# --- 42-node map ------------------------------------------------------------

NODES_42 = [
    65293741, 65293743, 65295330, 65303533, 65303538, 65303541, 65303544,
    65303546, 65306810, 65306931, 65307042, 65312903, 65313133, 65313138,
    65314156, 65314158, 65317939, 65318282, 65326742, 65326744, 65328690,
    65329981, 65332806, 65334120, 65335444, 65343958, 65371286, 386885670,
    552853360, 1271001343, 1271001348, 1308305528, 1578907668, 1580501206,
    1580501214, 1723738829, 2936165726, 3902413693, 6378899319, 6925582021,
    6988532585, 6988532615,
]

# Road segments required by prompt fixtures and routing examples.
PINNED_EDGES = [
    (65293741, 65293743), (65293741, 65318282), (65293741, 1723738829),
    (65293743, 65293741), (65293743, 65306931),
    (65303533, 65303538), (65303538, 6378899319), (65303538, 1271001348),
    (65303541, 65303544), (65303541, 1271001343),
    (65334120, 65314158), (1580501206, 65334120),
    (65317939, 1580501214),
    (65314156, 6988532585), (6988532585, 386885670), (386885670, 1271001343),
    (1271001343, 6988532615), (6988532615, 2936165726), (2936165726, 65317939),
    (1308305528, 6988532585), (552853360, 1308305528),
    (65313133, 65313138), (65313138, 1578907668), (1578907668, 552853360),
    (65328690, 2936165726),
    (65317939, 65371286), (65371286, 65332806), (65332806, 65313133),
    (65313133, 65326742), (65326742, 65326744), (65326744, 65343958),
    (2936165726, 3902413693), (3902413693, 552853360),
    (6988532585, 65303544), (65303544, 65303546),
    (6925582021, 65306810),
]

# The out-neighborhood of this node is pinned by a prompt fixture.
FROZEN_OUT = {65293741}

# (source, target, exact hop distance) that must survive edge additions.
DIST_PINS = [
    (65328690, 65343958, 8),
    (65328690, 65303546, 7),
]

# Two-way connectors stitching the pinned chains into one street network.
CONNECTORS = [
    # B.1 block to the main web
    (65318282, 65314156), (65314156, 65318282),
    (1723738829, 65334120), (65334120, 1723738829),
    (65306931, 65295330), (65295330, 65306931),
    (65295330, 65328690), (65328690, 65295330),
    # north block (65303533 group) to the main web
    (6378899319, 65303541), (65303541, 6378899319),
    (1271001348, 3902413693), (3902413693, 1271001348),
    (65303533, 65307042), (65307042, 65303533),
    (65307042, 65371286), (65371286, 65307042),
    # idle-taxi block
    (65306810, 65313133), (65313133, 65306810),
    (6925582021, 1578907668), (1578907668, 6925582021),
    (65306810, 6925582021),
    # fillers
    (65312903, 65332806), (65332806, 65312903),
    (65312903, 1580501206), (1580501206, 65312903),
    (65329981, 65326742), (65326742, 65329981),
    (65329981, 65343958), (65343958, 65329981),
    (65335444, 1580501214), (1580501214, 65335444),
    (65335444, 65314158), (65314158, 65335444),
    # extra cross streets
    (65314158, 65317939), (65317939, 65314158),
    (1580501214, 65326744), (65326744, 1580501214),
    (386885670, 65312903), (65312903, 386885670),
    (6925582021, 65307042), (65307042, 6925582021),
    (65306931, 65318282), (65318282, 65306931),
    (1723738829, 65318282), (65318282, 1723738829),
    (65306931, 65293741),
    (6378899319, 1271001348), (1271001348, 6378899319),
    (1271001348, 65303533),
    (65303546, 65329981), (65329981, 65303546),
    (65313138, 65306810), (65306810, 65313138),
    (6988532615, 65317939), (65317939, 6988532615),
    (65312903, 65313133), (65313133, 65312903),
    (65295330, 65306810), (65306810, 65295330),
    (6925582021, 65312903), (65312903, 6925582021),
    (65307042, 6378899319), (6378899319, 65307042),
    (65303541, 65303533), (65303533, 65303541),
    (65329981, 65312903), (65312903, 65329981),
    (1580501206, 65335444), (65335444, 1580501206),
    (386885670, 65314156),
    (65332806, 65371286),
    (552853360, 1578907668),
]


def _bfs_dist(adj: dict[int, list[int]], src: int) -> dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        cur = q.popleft()
        for nxt in adj[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                q.append(nxt)
    return dist


def _strongly_connected(adj: dict[int, list[int]]) -> bool:
    nodes = list(adj)
    fwd = _bfs_dist(adj, nodes[0])
    if len(fwd) != len(nodes):
        return False
    rev: dict[int, list[int]] = {n: [] for n in nodes}
    for src, outs in adj.items():
        for dst in outs:
            rev[dst].append(src)
    bwd = _bfs_dist(rev, nodes[0])
    return len(bwd) == len(nodes)


def _dist_pins_hold(adj: dict[int, list[int]]) -> bool:
    for src, dst, want in DIST_PINS:
        if _bfs_dist(adj, src).get(dst) != want:
            return False
    return True


def build_midtown() -> dict:
    adj: dict[int, list[int]] = {n: [] for n in NODES_42}
    for src, dst in PINNED_EDGES:
        adj[src].append(dst)
    assert _dist_pins_hold(adj), "pinned chains violate distance pins"

    candidates: list[tuple[int, int]] = []
    # reverse streets of pinned segments first, then designed connectors
    candidates.extend((dst, src) for src, dst in PINNED_EDGES)
    candidates.extend(CONNECTORS)

    target_edges = 125
    n_edges = len(PINNED_EDGES)
    for src, dst in candidates:
        if n_edges == target_edges:
            break
        if src in FROZEN_OUT or src == dst or dst in adj[src]:
            continue
        adj[src].append(dst)
        if _dist_pins_hold(adj):
            n_edges += 1
        else:
            adj[src].remove(dst)

    assert n_edges == target_edges, f"got {n_edges} edges, want {target_edges}"
    assert _strongly_connected(adj), "midtown map is not strongly connected"
    assert sorted(adj[65293741]) == [65293743, 65318282, 1723738829]

    # Coordinates: fixed values for the three intersections quoted in prompt
    # fixtures, a jittered grid for the rest (cosmetic only).
    coords = {
        65293741: (-122.4097034, 37.7817636),
        65293743: (-122.4092587, 37.7814105),
        65303533: (-122.4038718, 37.7898332),
    }
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([42])))
    others = [n for n in NODES_42 if n not in coords]
    for i, n in enumerate(others):
        row, col = divmod(i, 7)
        lon = -122.4105 + col * 0.00085 + float(rng.uniform(-0.00012, 0.00012))
        lat = 37.7795 + row * 0.00068 + float(rng.uniform(-0.0001, 0.0001))
        coords[n] = (round(lon, 7), round(lat, 7))

    return {
        "id": "sf-midtown-42",
        "nodes": [
            {"id": n, "lon": coords[n][0], "lat": coords[n][1]}
            for n in sorted(NODES_42)
        ],
        "edges": [
            {"from": src, "to": dst}
            for src in sorted(adj)
            for dst in sorted(adj[src])
        ],
    }


# --- large map ---------------------------------------------------------------


def build_large(rows: int = 16, cols: int = 16) -> dict:
    """Street grid with alternating one-way rows/columns and a two-way rim."""
    base = 7_000_000_000
    node_id = {}
    for r in range(rows):
        for c in range(cols):
            node_id[(r, c)] = base + r * 1000 + c * 7 + (r * c) % 5

    adj: dict[int, set[int]] = {nid: set() for nid in node_id.values()}

    def connect(a, b, two_way):
        adj[node_id[a]].add(node_id[b])
        if two_way:
            adj[node_id[b]].add(node_id[a])

    for r in range(rows):
        for c in range(cols - 1):
            rim = r in (0, rows - 1)
            if rim or r % 3 == 2:
                connect((r, c), (r, c + 1), True)
            elif r % 2 == 0:
                connect((r, c), (r, c + 1), False)
            else:
                connect((r, c + 1), (r, c), False)
    for c in range(cols):
        for r in range(rows - 1):
            rim = c in (0, cols - 1)
            if rim or c % 3 == 2:
                connect((r, c), (r + 1, c), True)
            elif c % 2 == 0:
                connect((r, c), (r + 1, c), False)
            else:
                connect((r + 1, c), (r, c), False)

    final = {n: sorted(outs) for n, outs in adj.items()}
    assert _strongly_connected(final), "large map is not strongly connected"

    coords = {}
    for (r, c), nid in node_id.items():
        coords[nid] = (
            round(-122.4180 + c * 0.00071, 7),
            round(37.7700 + r * 0.00057, 7),
        )
    return {
        "id": "sf-grid-large",
        "nodes": [
            {"id": n, "lon": coords[n][0], "lat": coords[n][1]}
            for n in sorted(final)
        ],
        "edges": [
            {"from": src, "to": dst}
            for src in sorted(final)
            for dst in sorted(final[src])
        ],
    }


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    midtown = build_midtown()
    large = build_large()
    for doc in (midtown, large):
        path = OUT_DIR / f"{doc['id'].replace('-', '_')}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        print(
            f"wrote {path.name}: {len(doc['nodes'])} nodes, "
            f"{len(doc['edges'])} edges"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
