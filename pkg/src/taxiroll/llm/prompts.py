"""Prompt construction for the language-model dispatch policy.

The environment is grounded in text: the system prompt carries the full node
and road listing, the user prompt carries fleet status, per-taxi shortest
routes to every outstanding request, and the already-known / expected actions
of the other taxis.  Replies are requested in one canonical tuple form that
``parse_action`` can read back.
"""
from __future__ import annotations

from ..demand import Request
from ..fleet import AgentAction, FleetState, AgentStatus
from ..roadgraph import RoadGraph
from .client import ChatMessage

ACTION_FORMAT_LINE = (
    "Please provide your next action as a tuple in the format: "
    "(pickup: True or False, next position: a numeric value)."
)

COT_INSTRUCTION = """Before deciding your next action, consider the following steps:
1. Identify all outstanding requests.
2. Determine which request you should prioritize picking up, aiming to minimize the total waiting time.
   - You should pick up a request immediately if you are at the same location/one step away from the request.
   - You can move to a node and pick up the request at that node in the same step.
3. Evaluate which requests other agents are already closer to or actively moving toward, based on their known or expected actions. Adjust your action if necessary.
After reasoning through these steps, provide your next action as a tuple in the format: (pickup: True or False, next position: a numeric value).
Remember, your goal is to minimize total waiting time and avoid targeting requests that are better suited for other agents unless no alternative exists."""


def render_action(action: AgentAction) -> str:
    """Canonical tuple form; parse_action inverts this exactly."""
    return f"(pickup: {action.pickup}, next position: {action.next_position})"


def describe_action(action: AgentAction) -> str:
    """Phrase an action for the Known/Expected next-action prompt lines."""
    if action.pickup:
        return f"pickup at {action.next_position}"
    return f"do not pickup, go to {action.next_position}"


def build_system_prompt(g: RoadGraph, semantic_context: str | None = None) -> ChatMessage:
    """Environment description: every node with coordinates, every directed
    road, optional semantic context (e.g. weather), then the decision rules."""
    node_list = ", ".join(
        f"{nid}: ({g.nodes[nid][0]}, {g.nodes[nid][1]})" for nid in g.node_ids
    )
    road_list = ", ".join(
        f"{src} to {dst}" for src in g.node_ids for dst in g.out_edges[src]
    )
    parts = [
        "You are a taxi driver in a multi-taxicab team on a map described by "
        "roads and intersections. Nodes (intersections) are listed by index "
        f"with coordinates (longitude, latitude): {node_list}.",
        "Roads are expressed as connections between nodes in the form "
        f"'from node to node': {road_list}.",
    ]
    if semantic_context:
        parts.append(semantic_context)
    parts.append(
        "Your goal is to minimize the waiting time of all riders. "
        "Make your decisions based on the following rules:\n"
        "1. A taxi can only pick up an active request if it is idle.\n"
        "2. If no request exists or you choose not to pick up, you must "
        "decide where to move next."
    )
    return ChatMessage("system", "\n\n".join(parts))


def _status_line(i: int, status: AgentStatus, is_self: bool) -> str:
    who = "You" if is_self else f"Taxi {i}"
    verb = "are" if is_self else "is"
    if status.available:
        return f"{who} {verb} idle at location {status.position}."
    return (
        f"{who} {verb} occupied at location {status.position}, "
        f"driving a rider to {status.destination} "
        f"({status.remaining_time} minutes remaining)."
    )


def _request_block(state: FleetState, g: RoadGraph) -> str:
    lines = ["Currently there are outstanding requests in the system:"]
    for r in state.outstanding:
        lines.append(f"pickup_location: {r.pickup}")
        for i, status in enumerate(state.agents):
            route = g.paths.route(status.position, r.pickup)
            if route is None:
                lines.append(f"  Taxi {i} shortest route: unreachable")
            else:
                lines.append(
                    f"  Taxi {i} shortest route: [{', '.join(str(n) for n in route)}] "
                    f"(length: {len(route) - 1})"
                )
    return "\n".join(lines)


def build_user_prompt(
    state: FleetState,
    g: RoadGraph,
    agent: int,
    fixed: tuple[AgentAction, ...] = (),
    suggested: tuple[AgentAction, ...] = (),
) -> ChatMessage:
    """Decision prompt for one agent.

    ``fixed`` holds the already-decided actions of agents 0..agent-1
    (rendered as "Known next action"); ``suggested`` holds expected actions
    of agents agent+1..m-1 ("Expected next action").
    """
    lines = [
        f"You are Taxi {agent}. You may only pick up a request if there is "
        "an active request in the system."
    ]
    for i, status in enumerate(state.agents):
        lines.append(_status_line(i, status, i == agent))
    if state.outstanding:
        lines.append(_request_block(state, g))
    else:
        lines.append("Currently there are no active requests in the system.")
    for i, act in enumerate(fixed[:agent]):
        lines.append(f"Known next action for taxi {i}: {describe_action(act)}.")
    for offset, act in enumerate(suggested):
        i = agent + 1 + offset
        if i < state.num_agents:
            lines.append(
                f"Expected next action for taxi {i}: {describe_action(act)}."
            )
    lines.append(ACTION_FORMAT_LINE)
    return ChatMessage("user", " ".join(lines[:2]) + "\n" + "\n".join(lines[2:]))


def cot_user_prompt(base: ChatMessage) -> ChatMessage:
    """Zero-shot user prompt extended with the step-by-step instruction."""
    return ChatMessage("user", base.content + "\n\n" + COT_INSTRUCTION)


def build_value_prompt(
    state: FleetState, g: RoadGraph, agent: int, candidate: AgentAction
) -> ChatMessage:
    """Score-one-candidate prompt for the depth-1 tree search strategy."""
    base = build_user_prompt(state, g, agent)
    content = (
        base.content
        + f"\n\nCandidate action under evaluation: {render_action(candidate)}."
        + "\nOn a scale of 1 to 10, where 10 means this action minimizes the "
        "total waiting time of all riders the most, rate the candidate "
        "action. Reply with a single integer between 1 and 10."
    )
    return ChatMessage("user", content)


def reprompt_message(
    state: FleetState, g: RoadGraph, agent: int, attempted: int | None
) -> ChatMessage:
    """Feasibility feedback for the hallucination-checking strategy."""
    pos = state.agents[agent].position
    nbrs = ", ".join(str(n) for n in g.out_edges[pos])
    if attempted is None:
        trouble = "Your previous reply did not contain an action tuple."
    else:
        trouble = (
            f"Your previous next position {attempted} is invalid: it is not "
            f"reachable in one step from your current position {pos} and is "
            "not on a shortest route to any outstanding request."
        )
    content = (
        f"{trouble} Valid next positions are: stay at {pos} or move to one "
        f"of: {nbrs}. {ACTION_FORMAT_LINE}"
    )
    return ChatMessage("user", content)


def _exemplar(
    state: FleetState, g: RoadGraph, agent: int, reply: str,
    fixed: tuple[AgentAction, ...] = (),
    suggested: tuple[AgentAction, ...] = (),
) -> list[ChatMessage]:
    user = build_user_prompt(state, g, agent, fixed=fixed, suggested=suggested)
    coached = ChatMessage(
        "user",
        user.content
        + "\nYou should prefer picking up requests closer to you. "
        "You should not follow other agents.",
    )
    return [coached, ChatMessage("assistant", reply)]


def build_few_shot_exemplars(g: RoadGraph) -> list[ChatMessage]:
    """Three worked exchanges rendered on the live map.

    Covers the desired behaviors: claim an adjacent request, head toward the
    closest request, and defer when another taxi is closer.
    """
    # a short directed path a -> b -> c on this map
    a = next(n for n in g.node_ids if g.out_edges[n])
    b = g.out_edges[a][0]
    c = next((n for n in g.out_edges[b] if n != a), g.out_edges[b][0])
    far = g.node_ids[-1] if g.node_ids[-1] not in (a, b, c) else g.node_ids[-2]

    msgs: list[ChatMessage] = []
    # 1: agent 0 one hop from the request, other taxis farther: pick it up
    st1 = FleetState(
        clock=0,
        agents=(AgentStatus(a), AgentStatus(far), AgentStatus(far)),
        outstanding=(Request(0, b, c, 0),),
    )
    msgs += _exemplar(
        st1, g, 0,
        f"I'm the closest to the request at {b} among all taxis. I will pick "
        f"it up. My next action is: (pickup: True, next position: {b}).",
        suggested=(AgentAction(far), AgentAction(far)),
    )
    # 2: agent 1 two hops away but still closest: move toward it
    st2 = FleetState(
        clock=0,
        agents=(AgentStatus(far), AgentStatus(a), AgentStatus(far)),
        outstanding=(Request(0, c, a, 0),),
    )
    route = g.paths.route(a, c) or [a, b, c]
    msgs += _exemplar(
        st2, g, 1,
        f"I'm the closest to the request at {c} among all taxis. I will move "
        f"toward it. My next action is: (pickup: {route[1] == c}, next "
        f"position: {route[1]}).",
        suggested=(AgentAction(far),),
    )
    # 3: agent 1 farther than taxi 0 (whose action is already known): defer
    st3 = FleetState(
        clock=0,
        agents=(AgentStatus(a), AgentStatus(c), AgentStatus(far)),
        outstanding=(Request(0, b, c, 0),),
    )
    msgs += _exemplar(
        st3, g, 1,
        f"Since there is only one request at {b} and Taxi 0 is closer to it "
        f"and trying to pick it up, I will not try to pick it up. My next "
        f"action is: (pickup: False, next position: {c}).",
        fixed=(AgentAction(b, True),),
        suggested=(AgentAction(far),),
    )
    return msgs
