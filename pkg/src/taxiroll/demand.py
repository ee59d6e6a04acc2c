"""Stochastic request generation, scenario fixtures, and the frozen-parameter
future sampler used inside rollout lookahead.

The demand law is deliberately simple: per-step Poisson arrivals with
configurable (default uniform) pickup and dropoff node weights.  Load levels
are just arrival-rate presets supplied by configuration.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .roadgraph import RoadGraph
from .seeding import NS_CE_FAMILY, NS_CE_SAMPLE, NS_SCENARIO, make_rng

#: Rejection-sampling attempt cap for a single pickup/dropoff draw.
MAX_DRAW_ATTEMPTS = 1000


class DemandError(ValueError):
    """Raised for invalid demand models or unsatisfiable draws."""


class ScenarioError(ValueError):
    """Raised for malformed scenario documents."""


@dataclass(frozen=True)
class Request:
    """A rider: pickup/dropoff intersections plus entry and pickup times."""

    req_id: int
    pickup: int
    dropoff: int
    entry_time: int
    picked_up_at: int | None = None
    assigned_to: int | None = None

    def order_key(self) -> tuple[int, int]:
        return (self.entry_time, self.req_id)


@dataclass(frozen=True)
class DemandModel:
    """Poisson arrivals with categorical pickup/dropoff node weights.

    ``None`` weights mean uniform over the map's nodes.
    """

    arrival_rate: float
    pickup_weights: dict[int, float] | None = None
    dropoff_weights: dict[int, float] | None = None

    def __post_init__(self) -> None:
        if self.arrival_rate <= 0:
            raise DemandError(f"arrival_rate must be positive: {self.arrival_rate}")
        for name, weights in (
            ("pickup_weights", self.pickup_weights),
            ("dropoff_weights", self.dropoff_weights),
        ):
            if weights is None:
                continue
            if not weights:
                raise DemandError(f"{name} must not be empty")
            if any(w < 0 for w in weights.values()):
                raise DemandError(f"{name} must be non-negative")
            if sum(weights.values()) <= 0:
                raise DemandError(f"{name} must have positive total weight")


@dataclass(frozen=True)
class Scenario:
    """A fixed map reference plus a fixed timed request sequence."""

    map_id: str
    horizon: int
    requests: tuple[Request, ...]
    load_level: str = "custom"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ScenarioError(f"horizon must be >= 1: {self.horizon}")
        keys = [r.order_key() for r in self.requests]
        if keys != sorted(keys):
            raise ScenarioError("requests must be sorted by (entry_time, req_id)")
        for r in self.requests:
            if r.entry_time < 0 or r.entry_time >= self.horizon:
                raise ScenarioError(
                    f"request {r.req_id} entry_time {r.entry_time} outside "
                    f"[0, {self.horizon})"
                )
            if r.pickup == r.dropoff:
                raise ScenarioError(f"request {r.req_id} pickup equals dropoff")


def _node_sampler(g: RoadGraph, weights: dict[int, float] | None):
    ids = np.asarray(g.node_ids, dtype=np.int64)
    if weights is None:
        return ids, None
    probs = np.array([float(weights.get(nid, 0.0)) for nid in g.node_ids])
    total = probs.sum()
    if total <= 0:
        raise DemandError("weights assign zero mass to every map node")
    return ids, probs / total


def _draw_pair(
    rng: np.random.Generator,
    g: RoadGraph,
    pick_ids: np.ndarray,
    pick_p: np.ndarray | None,
    drop_ids: np.ndarray,
    drop_p: np.ndarray | None,
) -> tuple[int, int]:
    table = g.paths
    for _ in range(MAX_DRAW_ATTEMPTS):
        pickup = int(rng.choice(pick_ids, p=pick_p))
        dropoff = int(rng.choice(drop_ids, p=drop_p))
        if pickup != dropoff and table.reachable(pickup, dropoff):
            return pickup, dropoff
    raise DemandError(
        "could not draw a reachable (pickup, dropoff) pair after "
        f"{MAX_DRAW_ATTEMPTS} attempts"
    )


def sample_scenario(
    model: DemandModel,
    g: RoadGraph,
    horizon: int,
    seed: int,
    load_level: str = "custom",
) -> Scenario:
    """Draw a scenario: per-step Poisson arrival counts, weighted node pairs.

    Fully determined by ``seed``; invalid pairs (same node, or dropoff not
    reachable from pickup) are rejection-sampled away.
    """
    if horizon < 1:
        raise ScenarioError(f"horizon must be >= 1: {horizon}")
    rng = make_rng(NS_SCENARIO, seed)
    pick_ids, pick_p = _node_sampler(g, model.pickup_weights)
    drop_ids, drop_p = _node_sampler(g, model.dropoff_weights)
    requests: list[Request] = []
    for t in range(horizon):
        for _ in range(int(rng.poisson(model.arrival_rate))):
            pickup, dropoff = _draw_pair(rng, g, pick_ids, pick_p, drop_ids, drop_p)
            requests.append(
                Request(
                    req_id=len(requests),
                    pickup=pickup,
                    dropoff=dropoff,
                    entry_time=t,
                )
            )
    return Scenario(
        map_id=g.map_id,
        horizon=horizon,
        requests=tuple(requests),
        load_level=load_level,
        seed=seed,
    )


class CeFutureSampler:
    """Certainty-equivalence future generator for one rollout decision.

    The distribution parameters are frozen: every sampled future contains
    exactly ``round(arrival_rate * t_h)`` requests, and the multisets of
    pickup and dropoff nodes are drawn once per sampler.  Individual samples
    only re-randomize the pickup/dropoff pairing and the arrival timing.
    """

    def __init__(
        self, model: DemandModel, g: RoadGraph, t_h: int, family_seed: int
    ) -> None:
        if t_h < 1:
            raise DemandError(f"t_h must be >= 1: {t_h}")
        self.t_h = t_h
        self.family_seed = family_seed
        self.count = int(math.floor(model.arrival_rate * t_h + 0.5))
        rng = make_rng(NS_CE_FAMILY, family_seed)
        pick_ids, pick_p = _node_sampler(g, model.pickup_weights)
        drop_ids, drop_p = _node_sampler(g, model.dropoff_weights)
        table = g.paths
        pickups: list[int] = []
        dropoffs: list[int] = []
        for _ in range(self.count):
            pickups.append(int(rng.choice(pick_ids, p=pick_p)))
        for _ in range(self.count):
            # any pairing permutation must be executable, so each dropoff is
            # drawn valid against the whole pickup multiset
            for _attempt in range(MAX_DRAW_ATTEMPTS):
                cand = int(rng.choice(drop_ids, p=drop_p))
                if all(cand != p and table.reachable(p, cand) for p in pickups):
                    dropoffs.append(cand)
                    break
            else:
                raise DemandError(
                    "could not draw a dropoff reachable from every sampled pickup"
                )
        self.pickups = tuple(pickups)
        self.dropoffs = tuple(dropoffs)

    def sample(self, index: int) -> tuple[Request, ...]:
        """Future number ``index``: requests with entry times in [1, t_h].

        Entry times are relative to the decision state's clock; req_ids are
        slot numbers 0..count-1 (callers re-key them on injection).
        """
        rng = make_rng(NS_CE_SAMPLE, self.family_seed, index)
        perm = rng.permutation(self.count)
        times = rng.integers(1, self.t_h + 1, size=self.count)
        order = sorted(range(self.count), key=lambda s: (int(times[s]), s))
        return tuple(
            Request(
                req_id=slot,
                pickup=self.pickups[s],
                dropoff=self.dropoffs[int(perm[s])],
                entry_time=int(times[s]),
            )
            for slot, s in enumerate(order)
        )


def ce_future_sampler(
    model: DemandModel, g: RoadGraph, t_h: int, seed: int
) -> tuple[Request, ...]:
    """One certainty-equivalence future stream, fully determined by seed."""
    return CeFutureSampler(model, g, t_h, family_seed=seed).sample(0)


def shift_future(
    future: tuple[Request, ...], clock: int, id_base: int
) -> list[Request]:
    """Rebase a relative future onto an absolute clock with fresh req_ids."""
    return [
        replace(r, req_id=id_base + r.req_id, entry_time=clock + r.entry_time)
        for r in future
    ]


def save_scenario(s: Scenario) -> bytes:
    """Canonical JSON bytes; round-trips losslessly through load_scenario."""
    doc = {
        "map_id": s.map_id,
        "horizon": s.horizon,
        "load_level": s.load_level,
        "seed": s.seed,
        "requests": [
            {
                "req_id": r.req_id,
                "pickup": r.pickup,
                "dropoff": r.dropoff,
                "entry_time": r.entry_time,
            }
            for r in s.requests
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode()


def load_scenario(data: bytes | str, g: RoadGraph | None = None) -> Scenario:
    """Parse and validate a scenario document.

    When a graph is supplied, request endpoints are checked against it
    (existence and pickup-to-dropoff reachability).
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario document is not valid JSON: {exc}") from exc
    try:
        requests = tuple(
            Request(
                req_id=int(r["req_id"]),
                pickup=int(r["pickup"]),
                dropoff=int(r["dropoff"]),
                entry_time=int(r["entry_time"]),
            )
            for r in doc["requests"]
        )
        scenario = Scenario(
            map_id=str(doc["map_id"]),
            horizon=int(doc["horizon"]),
            requests=requests,
            load_level=str(doc["load_level"]),
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    if g is not None:
        if scenario.map_id != g.map_id:
            raise ScenarioError(
                f"scenario is for map {scenario.map_id!r}, got {g.map_id!r}"
            )
        for r in scenario.requests:
            if r.pickup not in g.nodes or r.dropoff not in g.nodes:
                raise ScenarioError(f"request {r.req_id} references unknown nodes")
            if not g.paths.reachable(r.pickup, r.dropoff):
                raise ScenarioError(
                    f"request {r.req_id} dropoff unreachable from pickup"
                )
    return scenario
