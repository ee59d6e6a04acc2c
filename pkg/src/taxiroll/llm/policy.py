"""Language-model dispatch policy: parsing, grounding, and strategies.

A model reply is accepted when its next position is the agent's own node, an
adjacent node, or a node on some shortest route to an outstanding request's
pickup; on-route-but-not-adjacent outputs are executed as the first hop of
the shortest path toward them.  Anything else is a spatial hallucination.
Each agent decision yields at most one hallucination report, no matter how
many samples or reprompts it took, and the executed action always lands in
the agent's local control set (falling back to stay when everything failed).
"""
from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..fleet import AgentAction, FleetState, local_controls
from ..policies import BasePolicy, PolicyIncident
from ..roadgraph import RoadGraph
from .client import ChatMessage, LlmConfig, TransportError
from .prompts import (
    build_few_shot_exemplars,
    build_system_prompt,
    build_user_prompt,
    build_value_prompt,
    cot_user_prompt,
    render_action,
    reprompt_message,
)

_TUPLE_RE = re.compile(
    r"\(\s*pickup\s*:\s*(true|false)\s*,\s*next[\s_]*position\s*:\s*"
    r"[\[\*_$\s]*(\d+)[\]\*_$\s]*\)",
    re.IGNORECASE,
)
_INT_RE = re.compile(r"\b(\d+)\b")


@dataclass(frozen=True)
class ParsedAction:
    """Raw model output split into the action tuple and the reasoning text."""

    pickup: bool
    next_position: int
    raw_text: str
    reasoning: str = ""


@dataclass
class HallucinationReport:
    """A decision whose final model output could not be executed."""

    kind: str  # spatial | parse_failure
    step: int
    agent: int
    attempted: int | None = None
    counts_as_hallucination: bool = True


def parse_action(text: str) -> ParsedAction | None:
    """Extract the last action tuple from a reply, or None on parse failure.

    The boolean is case-insensitive and the node id tolerates bracket/italic
    wrappers; everything before the matched tuple is kept as reasoning.
    """
    matches = list(_TUPLE_RE.finditer(text))
    if not matches:
        return None
    m = matches[-1]
    return ParsedAction(
        pickup=m.group(1).lower() == "true",
        next_position=int(m.group(2)),
        raw_text=text,
        reasoning=text[: m.start()].strip(),
    )


def check_feasible(
    state: FleetState, g: RoadGraph, agent: int, parsed: ParsedAction
) -> HallucinationReport | None:
    """None when the parsed position is physically grounded, else a report.

    Grounded means: the agent's own node, an out-neighbor, or a node lying on
    some shortest route from the agent to an outstanding request's pickup.
    """
    pos = state.agents[agent].position
    target = parsed.next_position
    if target == pos or (target in g.nodes and target in g.out_edges[pos]):
        return None
    if target in g.nodes:
        for r in state.outstanding:
            if g.paths.on_some_shortest_route(pos, target, r.pickup):
                return None
    return HallucinationReport(
        kind="spatial", step=state.clock, agent=agent, attempted=target
    )


def _ground(
    state: FleetState, g: RoadGraph, agent: int, parsed: ParsedAction
) -> tuple[AgentAction | None, HallucinationReport | None, PolicyIncident | None]:
    """Turn a parsed reply into an executable action.

    Non-adjacent on-route positions are projected to the first hop toward
    them; a pickup flag with no request at the executed node is dropped and
    logged (not a hallucination, only next-position errors count)."""
    report = check_feasible(state, g, agent, parsed)
    if report is not None:
        return None, report, None
    pos = state.agents[agent].position
    target = parsed.next_position
    executed = target if (target == pos or target in g.out_edges[pos]) else (
        g.paths.hop_next(pos, target)
    )
    pickup = parsed.pickup
    incident = None
    if pickup and not any(r.pickup == executed for r in state.outstanding):
        pickup = False
        incident = PolicyIncident(
            kind="pickup_ignored",
            step=state.clock,
            agent=agent,
            detail=f"pickup=True at {executed} with no request there",
        )
    return AgentAction(executed, pickup), report, incident


def _score_from_reply(text: str) -> int:
    """First integer in [0, 10] found in a value reply; 0 when non-numeric."""
    for m in _INT_RE.finditer(text):
        v = int(m.group(1))
        if 0 <= v <= 10:
            return v
    return 0


def decide_with_strategy(
    state: FleetState,
    g: RoadGraph,
    agent: int,
    fixed: tuple[AgentAction, ...],
    suggested: tuple[AgentAction, ...],
    cfg: LlmConfig,
    client,
    system: ChatMessage | None = None,
) -> tuple[AgentAction, list]:
    """One grounded agent decision under the configured prompting strategy.

    Returns the executed action plus incident reports; if the strategy's
    final output is infeasible or unparseable the agent stays put and exactly
    one hallucination is counted for the decision.
    """
    pos = state.agents[agent].position
    stay = AgentAction(pos, False)
    if not state.agents[agent].available:
        return local_controls(state, g, agent)[0], []

    if system is None:
        system = build_system_prompt(g, cfg.semantic_context)
    user = build_user_prompt(state, g, agent, fixed, suggested)
    incidents: list = []

    def complete(messages, temperature):
        return client.complete(messages, temperature)

    try:
        if cfg.strategy == "tot":
            candidates = local_controls(state, g, agent)
            scores = [
                _score_from_reply(
                    complete([system, build_value_prompt(state, g, agent, c)],
                             cfg.temperature)
                )
                for c in candidates
            ]
            best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
            return candidates[best], incidents

        if cfg.strategy == "cot_sc":
            votes: Counter = Counter()
            last_failure: HallucinationReport | None = None
            sc_user = cot_user_prompt(user)
            for _ in range(cfg.sc_samples):
                text = complete([system, sc_user], cfg.sc_temperature)
                parsed = parse_action(text)
                if parsed is None:
                    last_failure = HallucinationReport(
                        kind="parse_failure", step=state.clock, agent=agent
                    )
                    continue
                action, report, flag_incident = _ground(state, g, agent, parsed)
                if action is None:
                    last_failure = report
                    continue
                if flag_incident is not None:
                    incidents.append(flag_incident)
                votes[(action.next_position, action.pickup)] += 1
            if not votes:
                incidents.append(
                    last_failure
                    or HallucinationReport(
                        kind="parse_failure", step=state.clock, agent=agent
                    )
                )
                return stay, incidents
            top = max(votes.values())
            winner = min(k for k, v in votes.items() if v == top)
            return AgentAction(winner[0], winner[1]), incidents

        # single-conversation strategies: zero_shot, few_shot, cot, zs_hc
        convo = [system]
        if cfg.strategy == "few_shot":
            convo += build_few_shot_exemplars(g)
        convo.append(cot_user_prompt(user) if cfg.strategy == "cot" else user)

        attempts = 1 + (cfg.max_reprompts if cfg.strategy == "zs_hc" else 0)
        last_report: HallucinationReport | None = None
        for _ in range(attempts):
            text = complete(convo, cfg.temperature)
            parsed = parse_action(text)
            if parsed is None:
                last_report = HallucinationReport(
                    kind="parse_failure", step=state.clock, agent=agent
                )
                attempted = None
            else:
                action, report, flag_incident = _ground(state, g, agent, parsed)
                if action is not None:
                    if flag_incident is not None:
                        incidents.append(flag_incident)
                    return action, incidents
                last_report = report
                attempted = parsed.next_position
            if cfg.strategy == "zs_hc":
                convo = convo + [
                    ChatMessage("assistant", text),
                    reprompt_message(state, g, agent, attempted),
                ]
        incidents.append(last_report)
        return stay, incidents

    except TransportError as exc:
        incidents.append(
            PolicyIncident(
                kind="transport",
                step=state.clock,
                agent=agent,
                detail=str(exc),
            )
        )
        return stay, incidents


class LlmPolicy(BasePolicy):
    """Language-model base policy over any chat client.

    ``joint_decide`` runs agents in index order, feeding each decided action
    forward as a "Known next action"; later agents are presented with
    stay-at-current expectations when no better suggestion is available.
    The system prompt is built once per graph and reused.
    """

    def __init__(self, cfg: LlmConfig, client):
        self.cfg = cfg
        self.client = client
        self.name = f"llm:{cfg.strategy}"
        self._incidents: list = []
        self._system: ChatMessage | None = None
        self._system_map: str | None = None

    def _system_for(self, g: RoadGraph) -> ChatMessage:
        if self._system is None or self._system_map != g.map_id:
            self._system = build_system_prompt(g, self.cfg.semantic_context)
            self._system_map = g.map_id
        return self._system

    def joint_decide(self, state: FleetState, g: RoadGraph):
        decided: list[AgentAction] = []
        for agent in range(state.num_agents):
            suggested = tuple(
                AgentAction(state.agents[j].position, False)
                for j in range(agent + 1, state.num_agents)
            )
            decided.append(
                self.per_agent_decide(state, g, agent, tuple(decided), suggested)
            )
        return tuple(decided)

    def per_agent_decide(
        self,
        state: FleetState,
        g: RoadGraph,
        agent: int,
        fixed: tuple[AgentAction, ...] = (),
        suggested: tuple[AgentAction, ...] = (),
    ) -> AgentAction:
        action, incidents = decide_with_strategy(
            state, g, agent, fixed, suggested, self.cfg, self.client,
            system=self._system_for(g),
        )
        self._incidents.extend(incidents)
        self._log(state, g, agent, action, incidents)
        return action

    def _log(self, state, g, agent, action, incidents) -> None:
        if not self.cfg.transcript_path:
            return
        halluc = next(
            (i for i in incidents if getattr(i, "counts_as_hallucination", False)),
            None,
        )
        user = build_user_prompt(state, g, agent)
        digest = hashlib.sha256(
            (self._system_for(g).content + user.content).encode()
        ).hexdigest()[:16]
        record = {
            "step": state.clock,
            "agent": agent,
            "messages_digest": digest,
            "action": render_action(action),
            "hallucination": getattr(halluc, "kind", None),
        }
        with Path(self.cfg.transcript_path).open("a") as fh:
            fh.write(json.dumps(record) + "\n")

    def drain_incidents(self) -> list:
        out = self._incidents
        self._incidents = []
        return out


def llm_joint_policy(cfg: LlmConfig, client) -> LlmPolicy:
    """Factory matching the policy-construction surface of the heuristics."""
    return LlmPolicy(cfg, client)
