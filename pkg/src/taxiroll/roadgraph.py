"""Directed road network with hop-metric shortest paths.

Intersections carry OpenStreetMap-style integer ids plus (lon, lat)
coordinates.  Coordinates are only ever rendered into prompts; every distance
in the package is a hop count over directed edges (one hop = one minute).
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

#: Distinguished hop-count value for "no directed route exists".
UNREACHABLE = -1


class MapError(ValueError):
    """Raised for malformed or inconsistent map documents."""


@dataclass(frozen=True)
class RoadGraph:
    """Immutable directed street graph.

    ``node_ids`` is sorted ascending and defines the dense index used by
    :class:`PathTable` and the simulation kernels; ``out_edges`` lists are
    sorted ascending and never contain duplicates or self-loops.
    """

    map_id: str
    nodes: dict[int, tuple[float, float]]
    out_edges: dict[int, tuple[int, ...]]
    node_ids: tuple[int, ...]
    index_of: dict[int, int]

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return sum(len(v) for v in self.out_edges.values())

    def __contains__(self, node: int) -> bool:
        return node in self.nodes

    @cached_property
    def paths(self) -> "PathTable":
        return all_pairs(self)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency over dense indices as (indptr, targets) CSR arrays."""
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int32)
        targets: list[int] = []
        for di, nid in enumerate(self.node_ids):
            for nbr in self.out_edges[nid]:
                targets.append(self.index_of[nbr])
            indptr[di + 1] = len(targets)
        return indptr, np.asarray(targets, dtype=np.int32)


@dataclass(frozen=True)
class PathTable:
    """All-pairs hop distances and smallest-id next hops over dense indices."""

    node_ids: tuple[int, ...]
    index_of: dict[int, int]
    dist: np.ndarray  # int32 [n, n]; UNREACHABLE where no route
    next_hop: np.ndarray  # int32 [n, n] dense index of first hop; -1 on diag/unreachable

    def hops(self, i: int, j: int) -> int:
        """Hop distance between node ids, or UNREACHABLE."""
        return int(self.dist[self.index_of[i], self.index_of[j]])

    def reachable(self, i: int, j: int) -> bool:
        return self.hops(i, j) != UNREACHABLE

    def hop_next(self, i: int, j: int) -> int:
        """First hop (node id) of the canonical route i -> j.

        Undefined for i == j or unreachable pairs (raises).
        """
        nxt = int(self.next_hop[self.index_of[i], self.index_of[j]])
        if nxt < 0:
            raise MapError(f"no next hop from {i} to {j}")
        return int(self.node_ids[nxt])

    def route(self, i: int, j: int) -> list[int] | None:
        """Canonical minimum-hop route [i, ..., j], or None if unreachable."""
        d = self.hops(i, j)
        if d == UNREACHABLE:
            return None
        out = [i]
        cur = i
        while cur != j:
            cur = self.hop_next(cur, j)
            out.append(cur)
        return out

    def on_some_shortest_route(self, i: int, v: int, j: int) -> bool:
        """Whether v lies on at least one minimum-hop route from i to j."""
        d_ij = self.hops(i, j)
        if d_ij == UNREACHABLE:
            return False
        d_iv = self.hops(i, v)
        d_vj = self.hops(v, j)
        if d_iv == UNREACHABLE or d_vj == UNREACHABLE:
            return False
        return d_iv + d_vj == d_ij


def load_map(data: bytes | str | dict) -> RoadGraph:
    """Parse and validate a map document.

    The document is JSON with an ``id`` string plus ``nodes``
    (``[{id, lon, lat}]``) and ``edges`` (``[{from, to}]``) arrays.
    """
    if isinstance(data, (bytes, str)):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MapError(f"map document is not valid JSON: {exc}") from exc
    else:
        doc = data
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise MapError("map document must contain 'nodes' and 'edges' arrays")
    map_id = str(doc.get("id", "unnamed"))

    nodes: dict[int, tuple[float, float]] = {}
    for entry in doc["nodes"]:
        try:
            nid = int(entry["id"])
            lon = float(entry["lon"])
            lat = float(entry["lat"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"malformed node entry {entry!r}") from exc
        if nid < 0:
            raise MapError(f"node id must be non-negative: {nid}")
        if nid in nodes:
            raise MapError(f"duplicate node id {nid}")
        nodes[nid] = (lon, lat)

    adj: dict[int, list[int]] = {nid: [] for nid in nodes}
    for entry in doc["edges"]:
        try:
            src = int(entry["from"])
            dst = int(entry["to"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"malformed edge entry {entry!r}") from exc
        if src not in nodes:
            raise MapError(f"unknown endpoint {src} in edge ({src}, {dst})")
        if dst not in nodes:
            raise MapError(f"unknown endpoint {dst} in edge ({src}, {dst})")
        if src == dst:
            raise MapError(f"self-loop edge ({src}, {dst})")
        if dst in adj[src]:
            raise MapError(f"duplicate edge ({src}, {dst})")
        adj[src].append(dst)

    node_ids = tuple(sorted(nodes))
    return RoadGraph(
        map_id=map_id,
        nodes={nid: nodes[nid] for nid in node_ids},
        out_edges={nid: tuple(sorted(adj[nid])) for nid in node_ids},
        node_ids=node_ids,
        index_of={nid: i for i, nid in enumerate(node_ids)},
    )


def dump_map(g: RoadGraph) -> str:
    """Canonical serialization; load/dump round-trips byte-identically."""
    doc = {
        "id": g.map_id,
        "nodes": [
            {"id": nid, "lon": g.nodes[nid][0], "lat": g.nodes[nid][1]}
            for nid in g.node_ids
        ],
        "edges": [
            {"from": src, "to": dst}
            for src in g.node_ids
            for dst in g.out_edges[src]
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def neighbors(g: RoadGraph, i: int) -> list[int]:
    """Out-neighbors of node i, ascending."""
    if i not in g.nodes:
        raise MapError(f"unknown node {i}")
    return list(g.out_edges[i])


def _dist_to_target(g: RoadGraph, j: int) -> dict[int, int]:
    """Hop distance from every node TO j (reverse breadth-first search)."""
    rev: dict[int, list[int]] = {nid: [] for nid in g.node_ids}
    for src, outs in g.out_edges.items():
        for dst in outs:
            rev[dst].append(src)
    dist = {j: 0}
    queue = deque([j])
    while queue:
        cur = queue.popleft()
        for prv in rev[cur]:
            if prv not in dist:
                dist[prv] = dist[cur] + 1
                queue.append(prv)
    return dist


def shortest_path(g: RoadGraph, i: int, j: int) -> list[int] | None:
    """Minimum-hop route from i to j inclusive, or None if unreachable.

    Ties are broken by taking the smallest next-hop node id at every step,
    which makes routes (and everything downstream of them) deterministic.
    """
    if i not in g.nodes:
        raise MapError(f"unknown node {i}")
    if j not in g.nodes:
        raise MapError(f"unknown node {j}")
    dist = _dist_to_target(g, j)
    if i not in dist:
        return None
    route = [i]
    cur = i
    while cur != j:
        cur = min(
            nbr for nbr in g.out_edges[cur] if dist.get(nbr, -1) == dist[cur] - 1
        )
        route.append(cur)
    return route


def all_pairs(g: RoadGraph) -> PathTable:
    """Precompute hop distances and canonical next hops for every pair.

    Maps stay small (a few hundred nodes) while rollout issues millions of
    distance queries, so the one-off O(V*(V+E)) cost pays for itself.
    """
    n = g.num_nodes
    dist = np.full((n, n), UNREACHABLE, dtype=np.int32)
    next_hop = np.full((n, n), -1, dtype=np.int32)

    rev: list[list[int]] = [[] for _ in range(n)]
    dense_out: list[list[int]] = [[] for _ in range(n)]
    for src, outs in g.out_edges.items():
        si = g.index_of[src]
        for dst in outs:
            di = g.index_of[dst]
            rev[di].append(si)
            dense_out[si].append(di)

    for tj in range(n):
        dist[tj, tj] = 0
        queue = deque([tj])
        while queue:
            cur = queue.popleft()
            for prv in rev[cur]:
                if dist[prv, tj] == UNREACHABLE:
                    dist[prv, tj] = dist[cur, tj] + 1
                    queue.append(prv)
        col = dist[:, tj]
        for si in range(n):
            if si == tj or col[si] == UNREACHABLE:
                continue
            want = col[si] - 1
            # dense indices are ordered like node ids, so the first match is
            # the smallest next-hop id
            for di in dense_out[si]:
                if col[di] == want:
                    next_hop[si, tj] = di
                    break
    return PathTable(
        node_ids=g.node_ids, index_of=g.index_of, dist=dist, next_hop=next_hop
    )
