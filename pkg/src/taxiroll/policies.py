"""Heuristic dispatch policies and the adapter wrapper for external ones.

Greedy sends every available taxi to its nearest outstanding request with no
coordination; instantaneous reassignment (IA-RA) re-matches all available
taxis to all outstanding requests each step with the assignment auction.
Both are deterministic functions of the state.
"""
from __future__ import annotations

from dataclasses import dataclass

from .assignment import auction_assign
from .demand import Request
from .fleet import AgentAction, FleetState, JointAction, local_controls
from .roadgraph import RoadGraph, UNREACHABLE


@dataclass
class PolicyIncident:
    """Non-fatal event recorded by a policy during one decision."""

    kind: str
    step: int
    agent: int
    detail: str = ""
    counts_as_hallucination: bool = False


class BasePolicy:
    """Default plumbing shared by concrete policies."""

    name = "policy"

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        raise NotImplementedError

    def per_agent_decide(
        self,
        state: FleetState,
        g: RoadGraph,
        agent: int,
        fixed: tuple[AgentAction, ...] = (),
        suggested: tuple[AgentAction, ...] = (),
    ) -> AgentAction:
        return self.joint_decide(state, g)[agent]

    def reseed(self, seed: int) -> None:
        pass

    def drain_incidents(self) -> list[PolicyIncident]:
        return []


def _forced_action(state: FleetState, g: RoadGraph, agent: int) -> AgentAction:
    status = state.agents[agent]
    assert status.destination is not None
    return AgentAction(g.paths.hop_next(status.position, status.destination))


def _march_towards(state: FleetState, g: RoadGraph, agent: int, target: int) -> AgentAction:
    """Next hop toward a pickup node, claiming it on arrival."""
    pos = state.agents[agent].position
    if pos == target:
        return AgentAction(pos, True)
    nxt = g.paths.hop_next(pos, target)
    return AgentAction(nxt, nxt == target)


class GreedyPolicy(BasePolicy):
    """Every available taxi independently chases its closest request."""

    name = "greedy"
    kernel_id = 0

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        return tuple(
            self.per_agent_decide(state, g, l) for l in range(state.num_agents)
        )

    def per_agent_decide(
        self,
        state: FleetState,
        g: RoadGraph,
        agent: int,
        fixed: tuple[AgentAction, ...] = (),
        suggested: tuple[AgentAction, ...] = (),
    ) -> AgentAction:
        status = state.agents[agent]
        if not status.available:
            return _forced_action(state, g, agent)
        target: Request | None = None
        best = -1
        # outstanding is (entry_time, req_id)-sorted, so the first strict
        # minimum realizes the earliest-entry-then-lowest-id tie-break
        for r in state.outstanding:
            d = g.paths.hops(status.position, r.pickup)
            if d == UNREACHABLE:
                continue
            if target is None or d < best:
                target = r
                best = d
        if target is None:
            return AgentAction(status.position, False)
        return _march_towards(state, g, agent, target.pickup)


class IaRaPolicy(BasePolicy):
    """Re-auction all available taxis against all outstanding requests every
    step; assigned taxis march to their request, surplus taxis stay."""

    name = "ia-ra"
    kernel_id = 1

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        avail = [l for l in range(state.num_agents) if state.agents[l].available]
        costs = [
            [
                g.paths.hops(state.agents[l].position, r.pickup)
                for r in state.outstanding
            ]
            for l in avail
        ]
        assignment = auction_assign(costs) if state.outstanding else None
        actions: list[AgentAction] = []
        for l in range(state.num_agents):
            if not state.agents[l].available:
                actions.append(_forced_action(state, g, l))
                continue
            row = avail.index(l)
            if assignment is not None and row in assignment.pairs:
                target = state.outstanding[assignment.pairs[row]]
                actions.append(_march_towards(state, g, l, target.pickup))
            else:
                actions.append(AgentAction(state.agents[l].position, False))
        return tuple(actions)


class StayPolicy(BasePolicy):
    """Degenerate scripted policy: never move, never pick up."""

    name = "stay"

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        return tuple(
            AgentAction(state.agents[l].position, False)
            if state.agents[l].available
            else _forced_action(state, g, l)
            for l in range(state.num_agents)
        )


class ExternalPolicy(BasePolicy):
    """Wrap an arbitrary adapter with action-validity enforcement.

    Any component action outside the agent's local control set is replaced by
    stay-in-place and logged as an incident instead of crashing the run.
    """

    def __init__(self, adapter, name: str | None = None):
        self.adapter = adapter
        self.name = name or f"external:{getattr(adapter, 'name', 'adapter')}"
        self._incidents: list[PolicyIncident] = []

    def joint_decide(self, state: FleetState, g: RoadGraph) -> JointAction:
        proposed = self.adapter.joint_decide(state, g)
        return tuple(
            self._enforce(state, g, l, proposed[l]) for l in range(state.num_agents)
        )

    def per_agent_decide(
        self,
        state: FleetState,
        g: RoadGraph,
        agent: int,
        fixed: tuple[AgentAction, ...] = (),
        suggested: tuple[AgentAction, ...] = (),
    ) -> AgentAction:
        proposed = self.adapter.per_agent_decide(state, g, agent, fixed, suggested)
        return self._enforce(state, g, agent, proposed)

    def _enforce(
        self, state: FleetState, g: RoadGraph, agent: int, action: AgentAction
    ) -> AgentAction:
        controls = local_controls(state, g, agent)
        if action in controls:
            return action
        fallback = controls[0]
        self._incidents.append(
            PolicyIncident(
                kind="invalid_action",
                step=state.clock,
                agent=agent,
                detail=f"adapter proposed {action}, fell back to {fallback}",
            )
        )
        return fallback

    def reseed(self, seed: int) -> None:
        if hasattr(self.adapter, "reseed"):
            self.adapter.reseed(seed)

    def drain_incidents(self) -> list[PolicyIncident]:
        out = self._incidents
        self._incidents = []
        if hasattr(self.adapter, "drain_incidents"):
            out = out + list(self.adapter.drain_incidents())
        return out


def greedy_policy(state: FleetState, g: RoadGraph) -> JointAction:
    """One greedy joint decision (functional form of GreedyPolicy)."""
    return GreedyPolicy().joint_decide(state, g)


def ia_ra_policy(state: FleetState, g: RoadGraph) -> JointAction:
    """One instantaneous-reassignment joint decision."""
    return IaRaPolicy().joint_decide(state, g)


def external_policy(adapter, name: str | None = None) -> ExternalPolicy:
    """Wrap an adapter with action-validity enforcement."""
    return ExternalPolicy(adapter, name=name)
