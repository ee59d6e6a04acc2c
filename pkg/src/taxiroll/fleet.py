"""Finite-horizon fleet MDP: state, local control sets, transition, costs.

Timing convention: a scenario with horizon N covers clocks 0..N-1.  The
initial state sits at clock 0 (holding any entry_time-0 requests), decisions
are taken at clocks 0..N-2, and the trajectory cost is the sum of stage costs
over all N visited states.  That makes the total cost exactly the riders'
accumulated waiting minutes:

    sum_k |outstanding(s_k)|  ==  sum_r (min(picked_up_at(r), N) - entry_time(r))

which the simulator asserts on every trajectory.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

from .demand import Request, Scenario
from .roadgraph import RoadGraph
from .seeding import NS_FLEET, make_rng


class TransitionError(ValueError):
    """Raised when a joint action is not executable in the given state."""


class SimulationError(RuntimeError):
    """Raised when a policy fails mid-trajectory or an invariant breaks."""


@dataclass(frozen=True)
class AgentStatus:
    """One taxi: position, and the remaining dropoff leg when occupied."""

    position: int
    remaining_time: int = 0
    destination: int | None = None

    def __post_init__(self) -> None:
        if (self.remaining_time > 0) != (self.destination is not None):
            raise ValueError(
                "remaining_time > 0 exactly when a destination is set: "
                f"{self}"
            )

    @property
    def available(self) -> bool:
        return self.remaining_time == 0


@dataclass(frozen=True)
class FleetState:
    """Snapshot at one clock tick: agents plus not-yet-picked-up requests.

    ``outstanding`` is always sorted by (entry_time, req_id); the transition
    preserves that ordering so oldest-first tie-breaks are a plain scan.
    """

    clock: int
    agents: tuple[AgentStatus, ...]
    outstanding: tuple[Request, ...]

    def __post_init__(self) -> None:
        keys = [r.order_key() for r in self.outstanding]
        if keys != sorted(keys):
            raise ValueError("outstanding requests must be (entry_time, req_id) sorted")
        for r in self.outstanding:
            if r.picked_up_at is not None:
                raise ValueError(f"outstanding request {r.req_id} already picked up")
            if r.entry_time > self.clock:
                raise ValueError(
                    f"request {r.req_id} enters at {r.entry_time} > clock {self.clock}"
                )

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def digest(self) -> str:
        """Stable content hash used by trace exports."""
        doc = {
            "clock": self.clock,
            "agents": [
                [a.position, a.remaining_time, a.destination] for a in self.agents
            ],
            "outstanding": [
                [r.req_id, r.pickup, r.dropoff, r.entry_time]
                for r in self.outstanding
            ],
        }
        raw = json.dumps(doc, separators=(",", ":")).encode()
        return hashlib.sha256(raw).hexdigest()[:16]


@dataclass(frozen=True)
class AgentAction:
    """(next position, pickup flag) for one agent."""

    next_position: int
    pickup: bool = False


JointAction = tuple[AgentAction, ...]


@runtime_checkable
class Policy(Protocol):
    """Decision-maker contract used by the simulator and by rollout.

    ``joint_decide`` returns one action per agent, each a member of that
    agent's local control set.  ``per_agent_decide`` exposes the same policy
    conditioned on already-fixed actions of earlier agents and suggested
    actions of later ones (heuristics may ignore both).
    """

    name: str

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction: ...

    def per_agent_decide(
        self,
        state: FleetState,
        g: RoadGraph,
        agent: int,
        fixed: tuple[AgentAction, ...],
        suggested: tuple[AgentAction, ...],
    ) -> AgentAction: ...

    def reseed(self, seed: int) -> None: ...

    def drain_incidents(self) -> list: ...


def local_controls(state: FleetState, g: RoadGraph, agent: int) -> list[AgentAction]:
    """Feasible actions for one agent, in canonical order.

    Occupied agents get exactly their forced next hop.  Available agents get
    stay-first-then-neighbors-ascending move actions, each followed by its
    pickup variant when an outstanding request sits at the target node
    (move-then-pickup happens within a single step).
    """
    status = state.agents[agent]
    if not status.available:
        assert status.destination is not None
        return [AgentAction(g.paths.hop_next(status.position, status.destination))]
    pickup_nodes = {r.pickup for r in state.outstanding}
    actions: list[AgentAction] = []
    for node in [status.position, *g.out_edges[status.position]]:
        actions.append(AgentAction(node, False))
        if node in pickup_nodes:
            actions.append(AgentAction(node, True))
    return actions


def stage_cost(state: FleetState) -> int:
    """Number of outstanding requests (per-step rider waiting cost)."""
    return len(state.outstanding)


def step(
    state: FleetState,
    action: JointAction,
    arrivals: list[Request] | tuple[Request, ...],
    g: RoadGraph,
) -> FleetState:
    """Apply a joint action and inject arrivals, producing the next state.

    Order of resolution: available agents move, pickups are claimed
    (oldest request first; ties across agents go to the lowest index),
    occupied agents advance one forced hop, then arrivals are appended and
    the clock increments.  A component action outside the agent's local
    control set is a programming error and is rejected loudly.
    """
    if len(action) != state.num_agents:
        raise TransitionError(
            f"joint action has {len(action)} components for {state.num_agents} agents"
        )
    for l, act in enumerate(action):
        if act not in local_controls(state, g, l):
            raise TransitionError(
                f"agent {l} action {act} infeasible at clock {state.clock}"
            )
    for r in arrivals:
        if r.entry_time != state.clock + 1:
            raise TransitionError(
                f"arrival {r.req_id} has entry_time {r.entry_time}, "
                f"expected {state.clock + 1}"
            )

    table = g.paths
    remaining = list(state.outstanding)
    agents: list[AgentStatus] = []
    for l, status in enumerate(state.agents):
        if status.available:
            new_pos = action[l].next_position
            new_status = AgentStatus(new_pos)
            if action[l].pickup:
                claim = next(
                    (r for r in remaining if r.pickup == new_pos), None
                )
                if claim is not None:
                    remaining.remove(claim)
                    new_status = AgentStatus(
                        position=new_pos,
                        remaining_time=table.hops(new_pos, claim.dropoff),
                        destination=claim.dropoff,
                    )
            agents.append(new_status)
        else:
            assert status.destination is not None
            new_pos = table.hop_next(status.position, status.destination)
            rem = status.remaining_time - 1
            agents.append(
                AgentStatus(
                    position=new_pos,
                    remaining_time=rem,
                    destination=status.destination if rem > 0 else None,
                )
            )
    return FleetState(
        clock=state.clock + 1,
        agents=tuple(agents),
        outstanding=tuple(remaining) + tuple(sorted(arrivals, key=Request.order_key)),
    )


def initial_fleet(scenario: Scenario, g: RoadGraph, num_agents: int) -> FleetState:
    """Clock-0 state: agent positions drawn from the scenario seed, plus any
    entry_time-0 requests."""
    rng = make_rng(NS_FLEET, scenario.seed, num_agents)
    ids = g.node_ids
    agents = tuple(
        AgentStatus(int(ids[int(rng.integers(len(ids)))])) for _ in range(num_agents)
    )
    initial = tuple(r for r in scenario.requests if r.entry_time == 0)
    return FleetState(clock=0, agents=agents, outstanding=initial)


@dataclass
class SimResult:
    total_cost: int
    trace: list[tuple[FleetState, JointAction]]
    hallucination_count: int
    final_state: FleetState
    incidents: list


def simulate(
    scenario: Scenario,
    policy: Policy,
    g: RoadGraph,
    num_agents: int = 3,
    seed: int = 0,
) -> SimResult:
    """Roll a policy through a scenario and return exact integer cost.

    The waiting-time identity is asserted on the finished trajectory; a
    policy exception is re-raised with the failing step index attached.
    """
    if hasattr(policy, "reseed"):
        policy.reseed(seed)
    arrivals_by_time: dict[int, list[Request]] = {}
    for r in scenario.requests:
        arrivals_by_time.setdefault(r.entry_time, []).append(r)

    state = initial_fleet(scenario, g, num_agents)
    total = stage_cost(state)
    trace: list[tuple[FleetState, JointAction]] = []
    incidents: list = []
    hallucinations = 0
    for k in range(scenario.horizon - 1):
        try:
            action = policy.joint_decide(state, g)
        except Exception as exc:
            raise SimulationError(
                f"policy {getattr(policy, 'name', policy)!r} failed at step {k}: {exc}"
            ) from exc
        if hasattr(policy, "drain_incidents"):
            step_incidents = policy.drain_incidents()
            incidents.extend(step_incidents)
            hallucinations += sum(
                1 for inc in step_incidents if getattr(inc, "counts_as_hallucination", False)
            )
        trace.append((state, action))
        state = step(state, action, arrivals_by_time.get(k + 1, []), g)
        total += stage_cost(state)

    expected = sum(
        min(
            r.picked_up_at if r.picked_up_at is not None else scenario.horizon,
            scenario.horizon,
        )
        - r.entry_time
        for r in _served_view(trace, state)
    )
    if total != expected:
        raise SimulationError(
            f"waiting-time identity violated: stage sum {total} != {expected}"
        )
    return SimResult(
        total_cost=total,
        trace=trace,
        hallucination_count=hallucinations,
        final_state=state,
        incidents=incidents,
    )


def _served_view(
    trace: list[tuple[FleetState, JointAction]], final_state: FleetState
) -> list[Request]:
    """Requests seen over a trajectory with pickup times reconstructed."""
    seen: dict[int, Request] = {}
    states = [s for s, _ in trace] + [final_state]
    for st in states:
        for r in st.outstanding:
            seen[r.req_id] = r
    picked: dict[int, int] = {}
    for prev, cur in zip(states, states[1:]):
        gone = {r.req_id for r in prev.outstanding} - {
            r.req_id for r in cur.outstanding
        }
        for rid in gone:
            picked[rid] = cur.clock
    return [
        replace(r, picked_up_at=picked.get(r.req_id))
        if picked.get(r.req_id) is not None
        else r
        for r in seen.values()
    ]


class ReplayPolicy:
    """Re-issues the joint actions recorded in a trace, keyed by clock."""

    def __init__(self, trace: list[tuple[FleetState, JointAction]]):
        self.name = "replay"
        self._by_clock = {state.clock: action for state, action in trace}

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        try:
            return self._by_clock[state.clock]
        except KeyError:
            raise SimulationError(f"trace has no action for clock {state.clock}")

    def per_agent_decide(self, state, g, agent, fixed, suggested):
        return self.joint_decide(state, g)[agent]

    def reseed(self, seed: int) -> None:
        pass

    def drain_incidents(self) -> list:
        return []


def export_trace(result: SimResult, scenario: Scenario, decision_log=None) -> str:
    """Line-delimited trace: header, one record per step, summary.

    ``decision_log`` (from a rollout policy run with record_q=True) adds the
    per-step candidate counts and Q tables as companion records.
    """
    lines = [
        json.dumps(
            {
                "type": "header",
                "map_id": scenario.map_id,
                "scenario_seed": scenario.seed,
                "horizon": scenario.horizon,
            }
        )
    ]
    q_by_clock = {clock: stats for clock, stats in (decision_log or [])}
    for state, action in result.trace:
        lines.append(
            json.dumps(
                {
                    "k": state.clock,
                    "state": state.digest(),
                    "action": [[a.next_position, a.pickup] for a in action],
                }
            )
        )
        stats = q_by_clock.get(state.clock)
        if stats is not None:
            lines.append(
                json.dumps(
                    {
                        "type": "q",
                        "k": state.clock,
                        "candidates": {
                            str(agent): len(table)
                            for agent, table in stats.q_tables.items()
                        },
                        "q_tables": {
                            str(agent): [
                                [
                                    q.action.next_position,
                                    q.action.pickup,
                                    float(q.mean_cost),
                                ]
                                for q in table
                            ]
                            for agent, table in stats.q_tables.items()
                        },
                    }
                )
            )
    lines.append(
        json.dumps(
            {
                "type": "summary",
                "total_cost": result.total_cost,
                "hallucinations": result.hallucination_count,
                "final_state": result.final_state.digest(),
            }
        )
    )
    return "\n".join(lines) + "\n"
