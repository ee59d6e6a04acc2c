import re

import pytest

from taxiroll.demand import Request
from taxiroll.fleet import AgentAction, AgentStatus, FleetState, local_controls
from taxiroll.llm import (
    ChatMessage,
    LlmConfig,
    LlmPolicy,
    MockChatClient,
    build_few_shot_exemplars,
    build_system_prompt,
    build_user_prompt,
    check_feasible,
    decide_with_strategy,
    parse_action,
    render_action,
)
from taxiroll.llm.client import MockScriptError
from taxiroll.llm.policy import _score_from_reply

# Assistant replies exercising the exact transcript tuple formats the parser
# must recover.
REPLY_IDLE_MOVE = (
    "As Taxi 0, I am idle at location 6925582021. I will check for active "
    "requests.\n\nThere are no active requests in the system. Therefore, I "
    "will decide where to move next. I will move to the closest idle taxi "
    "to reduce waiting time.\n\nThe closest idle taxi is Taxi 2, which is "
    "at location 65306810. I will move to location 65306810.\n\nMy next "
    "action is: (pickup: False, next position: 65306810)"
)
REPLY_FAR_PICKUP = (
    "To minimize the total waiting time of all riders, I will follow the "
    "given constraints and prioritize picking up requests closer to my "
    "current location.\n\nMy current location is 65328690.\n\nSince the "
    "first request 65343958 is closer to me, I will pick it up.\n\nMy next "
    "action is to pick up the request at location 65343958. "
    "(pickup: True, next position: 65343958)"
)
REPLY_CLOSEST_PICKUP = (
    "I'm the closest to the request at 65314158 among all taxis. I will "
    "pick it up. My next action is: (pickup: True, next position: 65314158)."
)


def idle(pos):
    return AgentStatus(pos)


def mock_cfg(**over):
    defaults = dict(endpoint="mock://unused", model_name="mock")
    defaults.update(over)
    return LlmConfig(**defaults)


class TestParseAction:
    def test_idle_move_transcript(self):
        parsed = parse_action(REPLY_IDLE_MOVE)
        assert (parsed.pickup, parsed.next_position) == (False, 65306810)
        assert "closest idle taxi" in parsed.reasoning

    def test_far_pickup_transcript(self):
        parsed = parse_action(REPLY_FAR_PICKUP)
        assert (parsed.pickup, parsed.next_position) == (True, 65343958)

    def test_closest_pickup_transcript(self):
        parsed = parse_action(REPLY_CLOSEST_PICKUP)
        assert (parsed.pickup, parsed.next_position) == (True, 65314158)

    def test_absent_tuple_is_parse_failure(self):
        assert parse_action("I cannot decide.") is None

    def test_last_occurrence_wins(self):
        text = (
            "Option A: (pickup: False, next position: 10). "
            "Final answer: (pickup: True, next position: 20)"
        )
        parsed = parse_action(text)
        assert (parsed.pickup, parsed.next_position) == (True, 20)

    @pytest.mark.parametrize(
        "text,expect",
        [
            ("(PICKUP: TRUE, NEXT POSITION: 7)", (True, 7)),
            ("(pickup: false, next_position: 42)", (False, 42)),
            ("(pickup: False, next position: [65306810])", (False, 65306810)),
            ("(pickup: False, next position: *123*)", (False, 123)),
            ("(pickup: False, next position: $99$)", (False, 99)),
        ],
    )
    def test_tolerant_formats(self, text, expect):
        parsed = parse_action(text)
        assert (parsed.pickup, parsed.next_position) == expect

    def test_render_round_trip(self):
        for pos in (0, 7, 65306810):
            for pickup in (False, True):
                action = AgentAction(pos, pickup)
                parsed = parse_action(render_action(action))
                assert (parsed.pickup, parsed.next_position) == (pickup, pos)


class TestCheckFeasible:
    def fixture_state(self):
        # agent at 65328690 with one outstanding request at 65303546
        return FleetState(
            clock=5,
            agents=(idle(65328690),),
            outstanding=(Request(0, 65303546, 6925582021, 3),),
        )

    def test_stay_ok(self, midtown):
        st = self.fixture_state()
        parsed = parse_action("(pickup: False, next position: 65328690)")
        assert check_feasible(st, midtown, 0, parsed) is None

    def test_neighbor_ok(self, midtown):
        st = self.fixture_state()
        nbr = midtown.out_edges[65328690][0]
        parsed = parse_action(f"(pickup: False, next position: {nbr})")
        assert check_feasible(st, midtown, 0, parsed) is None

    def test_on_route_ok(self, midtown):
        # three hops along the displayed route to the request
        st = self.fixture_state()
        route = midtown.paths.route(65328690, 65303546)
        parsed = parse_action(f"(pickup: False, next position: {route[3]})")
        assert check_feasible(st, midtown, 0, parsed) is None

    def test_far_node_is_spatial_hallucination(self, midtown):
        # 65343958 sits 8 hops away and off every shortest route to the
        # outstanding request: the transcripted failure case
        st = self.fixture_state()
        assert midtown.paths.hops(65328690, 65343958) == 8
        parsed = parse_action(REPLY_FAR_PICKUP)
        report = check_feasible(st, midtown, 0, parsed)
        assert report is not None
        assert report.kind == "spatial"
        assert report.attempted == 65343958

    def test_unknown_node_is_spatial(self, midtown):
        st = self.fixture_state()
        parsed = parse_action("(pickup: False, next position: 123456789)")
        report = check_feasible(st, midtown, 0, parsed)
        assert report is not None and report.kind == "spatial"

    def test_never_flags_local_controls(self, midtown):
        st = FleetState(
            clock=0,
            agents=(idle(65313133), idle(65317939)),
            outstanding=(Request(0, 65313138, 1578907668, 0),),
        )
        for l in range(2):
            for act in local_controls(st, midtown, l):
                parsed = parse_action(render_action(act))
                assert check_feasible(st, midtown, l, parsed) is None


class TestPrompts:
    def test_system_prompt_enumerates_map(self, midtown):
        msg = build_system_prompt(midtown)
        assert msg.role == "system"
        assert msg.content.startswith(
            "You are a taxi driver in a multi-taxicab team"
        )
        assert len(re.findall(r"\d+: \(-?\d", msg.content)) == 42
        assert len(re.findall(r"\b\d+ to \d+\b", msg.content)) == 125

    def test_semantic_context_optional(self, midtown):
        plain = build_system_prompt(midtown)
        assert "heavy rain" not in plain.content
        ctx = (
            "Current weather in San Francisco: heavy rain with temperature: "
            "11.8 C and wind speed: 7.9 km/h."
        )
        wet = build_system_prompt(midtown, ctx)
        assert "heavy rain" in wet.content
        # appended before the decision rules
        assert wet.content.index("heavy rain") < wet.content.index(
            "Make your decisions"
        )

    def test_user_prompt_no_requests(self, midtown):
        st = FleetState(
            clock=0,
            agents=(idle(6925582021), idle(1578907668), idle(65306810)),
            outstanding=(),
        )
        msg = build_user_prompt(st, midtown, 0)
        assert "You are Taxi 0" in msg.content
        assert "Please provide your next action as a tuple" in msg.content
        assert "no active requests" in msg.content

    def test_user_prompt_route_lines(self, midtown):
        st = FleetState(
            clock=0,
            agents=(idle(65334120), idle(1580501206)),
            outstanding=(Request(0, 65314158, 65317939, 0),),
        )
        msg = build_user_prompt(st, midtown, 0)
        assert "pickup_location: 65314158" in msg.content
        assert "[65334120, 65314158] (length: 1)" in msg.content

    def test_known_and_expected_lines(self, midtown):
        st = FleetState(
            clock=0,
            agents=(idle(65334120), idle(1580501206), idle(65306810)),
            outstanding=(),
        )
        msg = build_user_prompt(
            st,
            midtown,
            1,
            fixed=(AgentAction(65314158, False),),
            suggested=(AgentAction(65306810, False),),
        )
        assert msg.content.count("Known next action for taxi 0") == 1
        assert msg.content.count("Expected next action for taxi 2") == 1
        assert "do not pickup, go to 65306810" in msg.content

    def test_few_shot_exemplars_parse(self, midtown):
        exemplars = build_few_shot_exemplars(midtown)
        assert len(exemplars) == 6  # three user/assistant pairs
        roles = [m.role for m in exemplars]
        assert roles == ["user", "assistant"] * 3
        for msg in exemplars[1::2]:
            assert parse_action(msg.content) is not None


class TestStrategies:
    def b1_state(self):
        return FleetState(
            clock=0,
            agents=(idle(6925582021), idle(1578907668), idle(65306810)),
            outstanding=(),
        )

    def test_zero_shot_transcript_executes_move(self, midtown):
        client = MockChatClient.from_rules([(r"You are Taxi 0", REPLY_IDLE_MOVE)])
        action, incidents = decide_with_strategy(
            self.b1_state(), midtown, 0, (), (), mock_cfg(), client
        )
        # 65306810 is adjacent to 6925582021 on the bundled map
        assert action == AgentAction(65306810, False)
        assert incidents == []

    def test_far_output_grounded_to_first_hop(self, midtown):
        # reply names a node three hops along the route to the request;
        # executed action is the first hop toward it
        st = FleetState(
            clock=0,
            agents=(idle(65328690),),
            outstanding=(Request(0, 65303546, 6925582021, 0),),
        )
        route = midtown.paths.route(65328690, 65303546)
        reply = f"(pickup: False, next position: {route[3]})"
        client = MockChatClient.from_rules([(r".", reply)])
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(), client
        )
        assert action == AgentAction(route[1], False)
        assert incidents == []

    def test_zero_shot_hallucination_falls_back_to_stay(self, midtown):
        st = self.b1_state()
        client = MockChatClient.from_rules(
            [(r".", "(pickup: False, next position: 65343958)")]
        )
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(), client
        )
        assert action == AgentAction(6925582021, False)
        assert len(incidents) == 1
        assert incidents[0].kind == "spatial"
        assert client.calls == 1

    def test_zs_hc_exhausts_five_reprompts(self, midtown):
        st = self.b1_state()
        client = MockChatClient.from_rules(
            [(r".", "(pickup: False, next position: 65343958)")]
        )
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(strategy="zs_hc"), client
        )
        assert client.calls == 6  # initial + exactly 5 reprompts
        assert action == AgentAction(6925582021, False)
        halluc = [
            i for i in incidents if getattr(i, "counts_as_hallucination", False)
        ]
        assert len(halluc) == 1

    def test_zs_hc_recovers_after_feedback(self, midtown):
        st = self.b1_state()
        client = MockChatClient.from_rules(
            [
                (
                    r".",
                    [
                        "(pickup: False, next position: 65343958)",
                        "(pickup: False, next position: 65306810)",
                    ],
                )
            ]
        )
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(strategy="zs_hc"), client
        )
        assert client.calls == 2
        assert action == AgentAction(65306810, False)
        assert incidents == []  # recovered, nothing counted

    def test_cot_appends_step_list(self, midtown):
        seen = {}

        class Spy(MockChatClient):
            def complete(self, messages, temperature=0.0):
                seen["user"] = messages[-1].content
                return super().complete(messages, temperature)

        client = Spy.from_rules([(r".", REPLY_IDLE_MOVE)])
        decide_with_strategy(
            self.b1_state(), midtown, 0, (), (), mock_cfg(strategy="cot"), client
        )
        assert "Identify all outstanding requests" in seen["user"]

    def test_few_shot_prepends_exemplars(self, midtown):
        counts = {}

        class Spy(MockChatClient):
            def complete(self, messages, temperature=0.0):
                counts["n"] = len(messages)
                return super().complete(messages, temperature)

        client = Spy.from_rules([(r".", REPLY_IDLE_MOVE)])
        decide_with_strategy(
            self.b1_state(), midtown, 0, (), (),
            mock_cfg(strategy="few_shot"), client,
        )
        assert counts["n"] == 2 + 6  # system + 3 exemplar pairs + live user

    def test_cot_sc_majority_vote(self, midtown):
        st = self.b1_state()
        a = "(pickup: False, next position: 65306810)"
        b = "(pickup: False, next position: 6925582021)"
        client = MockChatClient.from_rules([(r".", [a, a, a, b, b])])
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(strategy="cot_sc", sc_samples=5),
            client,
        )
        assert client.calls == 5
        assert action == AgentAction(65306810, False)
        assert incidents == []

    def test_cot_sc_all_infeasible_counts_one(self, midtown):
        st = self.b1_state()
        client = MockChatClient.from_rules(
            [(r".", "(pickup: False, next position: 65343958)")]
        )
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(strategy="cot_sc", sc_samples=4),
            client,
        )
        assert action == AgentAction(6925582021, False)
        assert [i.kind for i in incidents] == ["spatial"]

    def test_tot_selects_max_scored_candidate(self, midtown):
        st = self.b1_state()
        candidates = local_controls(st, midtown, 0)
        # score each candidate by its position: last one highest
        replies = [str(i + 1) for i in range(len(candidates))]
        client = MockChatClient.from_rules([(r"Candidate action", replies)])
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(strategy="tot"), client
        )
        assert client.calls == len(candidates)
        assert action == candidates[-1]
        assert incidents == []

    def test_tot_non_numeric_scores_zero(self):
        assert _score_from_reply("no idea") == 0
        assert _score_from_reply("I rate this 7") == 7
        assert _score_from_reply("7/10 seems right") == 7
        assert _score_from_reply("probably 100... call it 4") == 4

    def test_pickup_flag_without_request_ignored(self, midtown):
        st = self.b1_state()  # no outstanding requests at all
        client = MockChatClient.from_rules(
            [(r".", "(pickup: True, next position: 65306810)")]
        )
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(), client
        )
        assert action == AgentAction(65306810, False)
        kinds = [i.kind for i in incidents]
        assert kinds == ["pickup_ignored"]
        assert not any(
            getattr(i, "counts_as_hallucination", False) for i in incidents
        )

    def test_parse_failure_counts_once(self, midtown):
        st = self.b1_state()
        client = MockChatClient.from_rules([(r".", "I cannot decide.")])
        action, incidents = decide_with_strategy(
            st, midtown, 0, (), (), mock_cfg(), client
        )
        assert action == AgentAction(6925582021, False)
        assert [i.kind for i in incidents] == ["parse_failure"]

    def test_executed_action_always_feasible(self, midtown):
        st = FleetState(
            clock=0,
            agents=(idle(65328690), idle(65313133)),
            outstanding=(Request(0, 65303546, 6925582021, 0),),
        )
        bad_replies = [
            "(pickup: True, next position: 65343958)",
            "nonsense",
            "(pickup: True, next position: 999999)",
        ]
        for reply in bad_replies:
            client = MockChatClient.from_rules([(r".", reply)])
            for l in range(2):
                action, _ = decide_with_strategy(
                    st, midtown, l, (), (), mock_cfg(), client
                )
                assert action in local_controls(st, midtown, l)


class TestLlmPolicy:
    def test_sequential_calls_and_known_forwarding(self, midtown):
        seen = []

        class Spy(MockChatClient):
            def complete(self, messages, temperature=0.0):
                seen.append(messages[-1].content)
                return super().complete(messages, temperature)

        client = Spy.from_rules(
            [(r"You are idle at location (\d+)",
              "(pickup: False, next position: {group1})")]
        )
        st = FleetState(
            clock=0,
            agents=(idle(6925582021), idle(1578907668), idle(65306810)),
            outstanding=(),
        )
        pol = LlmPolicy(mock_cfg(), client)
        action = pol.joint_decide(st, midtown)
        assert client.calls == 3  # one call per agent, in index order
        assert action == tuple(AgentAction(a.position, False) for a in st.agents)
        # second agent sees the first agent's decision as known
        assert "Known next action for taxi 0" in seen[1]
        assert "Expected next action for taxi 2" in seen[1]

    def test_occupied_agents_skip_the_client(self, midtown):
        client = MockChatClient.from_rules(
            [(r"You are idle at location (\d+)",
              "(pickup: False, next position: {group1})")]
        )
        dest = midtown.paths.route(65306810, 65328690)[-1]
        st = FleetState(
            clock=0,
            agents=(
                AgentStatus(
                    65306810,
                    remaining_time=midtown.paths.hops(65306810, dest),
                    destination=dest,
                ),
                idle(1578907668),
            ),
            outstanding=(),
        )
        pol = LlmPolicy(mock_cfg(), client)
        action = pol.joint_decide(st, midtown)
        assert client.calls == 1  # only the available agent consults the model
        assert action[0] == AgentAction(
            midtown.paths.hop_next(65306810, dest), False
        )

    def test_incidents_drain(self, midtown):
        client = MockChatClient.from_rules(
            [(r".", "(pickup: False, next position: 65343958)")]
        )
        st = FleetState(clock=0, agents=(idle(6925582021),), outstanding=())
        pol = LlmPolicy(mock_cfg(), client)
        pol.joint_decide(st, midtown)
        incidents = pol.drain_incidents()
        assert len(incidents) == 1
        assert pol.drain_incidents() == []

    def test_mock_script_error_when_no_rule(self, midtown):
        client = MockChatClient.from_rules([])
        st = FleetState(clock=0, agents=(idle(6925582021),), outstanding=())
        pol = LlmPolicy(mock_cfg(), client)
        with pytest.raises(MockScriptError):
            pol.joint_decide(st, midtown)

    def test_transcript_log_lines(self, midtown, tmp_path):
        import json

        path = tmp_path / "transcript.jsonl"
        client = MockChatClient.from_rules(
            [(r"You are idle at location (\d+)",
              "(pickup: False, next position: {group1})")]
        )
        st = FleetState(
            clock=4, agents=(idle(6925582021), idle(65306810)), outstanding=()
        )
        pol = LlmPolicy(mock_cfg(transcript_path=str(path)), client)
        pol.joint_decide(st, midtown)
        records = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(records) == 2
        assert records[0]["step"] == 4
        assert records[0]["agent"] == 0
        assert records[0]["hallucination"] is None
        assert "next position" in records[0]["action"]
