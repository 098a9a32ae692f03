"""Orchestrator tests: classification, routing, prompt grounding, failure paths."""

from __future__ import annotations

import json

import pytest

from teamroom.agents import (
    APOLOGY_TEXT, AgentRequest, CLASSIFICATION_LABELS, GENERIC_AGENT_ID, Intent,
    Orchestrator, OrchestratorConfig, SPECIALIST_AGENT_IDS, assemble_prompt,
    build_snapshot, load_profiles,
)
from teamroom.config import Mode
from teamroom.model import (
    Chat, ChatEntry, Join, NoteCreate, NoteKind, Position, SessionEvent, fold,
)
from teamroom.provider import MockProvider, ProviderPrompt, ProviderTimeout

T0 = 1_000_000_000_000


def _state(extra_chat: int = 0):
    payloads = [
        Join("p1", "Ava"),
        Join("p2", "Ben"),
        NoteCreate("n1", "p1", NoteKind.TEXT, "triangle base", Position(0, 0)),
        Chat("p2", "@boss is cardboard waterproof?"),
    ]
    payloads += [Chat("p1", f"filler line {i}") for i in range(extra_chat)]
    events = [SessionEvent(i + 1, T0 + i * 1000, p) for i, p in enumerate(payloads)]
    return fold(events), events


def _request(state, body: str = "@boss is cardboard waterproof?") -> AgentRequest:
    entry = ChatEntry(seq=state.last_seq, at=state.last_at, author="p2",
                      body=body, mentions=("boss",))
    return AgentRequest(requester="p2", message=entry, at_seq=state.last_seq)


@pytest.fixture
def orc():
    return Orchestrator(MockProvider())


class TestProfiles:
    def test_packaged_profiles_cover_all_agents(self):
        profiles = load_profiles()
        assert set(profiles) == set(SPECIALIST_AGENT_IDS) | {GENERIC_AGENT_ID}
        for profile in profiles.values():
            assert profile.system_prompt
            assert profile.agent_id in profile.system_prompt.lower() or profile.system_prompt

    def test_config_dir_overrides_one_profile(self, tmp_path):
        override = {"agent_id": "planning", "display_name": "Custom Planner",
                    "system_prompt": "custom planning persona", "response_style": "short"}
        (tmp_path / "planning.json").write_text(json.dumps(override), "utf-8")
        profiles = load_profiles(tmp_path)
        assert profiles["planning"].display_name == "Custom Planner"
        assert profiles["knowledge"].display_name != "Custom Planner"

    def test_missing_profile_is_an_error(self):
        profiles = load_profiles()
        del profiles["reflection"]
        with pytest.raises(ValueError):
            Orchestrator(MockProvider(), profiles=profiles)


class TestClassification:
    @pytest.mark.parametrize("body,intent", [
        ("@boss is cardboard waterproof?", Intent.KNOWLEDGE),
        ("@boss how should we divide the work?", Intent.PLANNING),
        ("@boss how are we doing on time?", Intent.MONITORING),
        ("@boss what went well in our design?", Intent.REFLECTION),
    ])
    def test_examples_route_to_expected_intent(self, orc, body, intent):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        assert orc.classify_intent(_request(state, body), ctx) is intent

    def test_unmatched_request_defaults_to_knowledge(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        assert orc.classify_intent(_request(state, "@boss hmm"), ctx) is Intent.KNOWLEDGE

    def test_provider_failure_falls_back_to_keywords(self):
        class FailingProvider:
            def complete(self, prompt, timeout_s=None):
                return ProviderTimeout("nope")

        orc = Orchestrator(FailingProvider())
        state, _ = _state()
        ctx = build_snapshot(state, "", state.last_at)
        request = _request(state, "@boss help us plan the next step")
        assert orc.classify_intent(request, ctx) is Intent.PLANNING

    def test_out_of_set_label_falls_back_to_keywords(self):
        class ChattyProvider:
            def complete(self, prompt, timeout_s=None):
                return "Well, that sounds like a Planning question to me!"

        orc = Orchestrator(ChattyProvider())
        state, _ = _state()
        ctx = build_snapshot(state, "", state.last_at)
        request = _request(state, "@boss what went well?")
        assert orc.classify_intent(request, ctx) is Intent.REFLECTION


class TestRouting:
    def test_every_intent_maps_to_distinct_agent(self, orc):
        agents = {orc.route(intent).agent_id for intent in Intent}
        assert agents == set(SPECIALIST_AGENT_IDS)

    def test_route_matches_intent_value(self, orc):
        for intent in Intent:
            assert orc.route(intent).agent_id == intent.value


class TestSnapshot:
    def test_snapshot_is_bounded_by_state(self):
        state, events = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        assert ctx.at_seq == state.last_seq
        assert ctx.participants == {"p1": "Ava", "p2": "Ben"}
        assert ctx.note_counts == {"p1": 1}
        assert ctx.participation == {"p1": 2, "p2": 2}
        assert ctx.elapsed_s == pytest.approx((state.last_at - T0) / 1000.0)

    def test_chat_window_keeps_newest(self):
        state, _ = _state(extra_chat=40)
        ctx = build_snapshot(state, "", state.last_at, chat_window=5)
        assert len(ctx.recent_chat) == 5
        assert ctx.recent_chat[-1].body == "filler line 39"


class TestPromptAssembly:
    def test_assembly_is_deterministic(self, orc):
        state, _ = _state(extra_chat=3)
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        request = _request(state)
        profile = orc.profiles["knowledge"]
        assert assemble_prompt(profile, request, ctx) == assemble_prompt(profile, request, ctx)

    def test_prompt_contains_grounding_sections(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        prompt = assemble_prompt(orc.profiles["knowledge"], _request(state), ctx)
        text = prompt.user_turns[0][1]
        assert "Task: build a bridge" in text
        assert "triangle base" in text
        assert "Student request (Ben): @boss is cardboard waterproof?" in text
        assert "Participation:" in text

    def test_empty_whiteboard_gets_explicit_marker(self, orc):
        events = [SessionEvent(1, T0, Join("p1", "Ava")),
                  SessionEvent(2, T0 + 1000, Chat("p1", "@boss hello"))]
        state = fold(events)
        ctx = build_snapshot(state, "", state.last_at)
        prompt = assemble_prompt(orc.profiles["knowledge"], _request(state, "@boss hello"), ctx)
        assert "(no notes yet)" in prompt.user_turns[0][1]

    def test_budget_drops_oldest_chat_first(self, orc):
        state, _ = _state(extra_chat=60)
        ctx = build_snapshot(state, "build a bridge", state.last_at, chat_window=60)
        config = OrchestratorConfig(prompt_char_budget=900)
        prompt = assemble_prompt(orc.profiles["knowledge"], _request(state), ctx, config)
        text = prompt.user_turns[0][1]
        assert len(text) <= 900
        assert "filler line 59" in text        # newest survives
        assert "filler line 0" not in text     # oldest dropped
        # the request line is never dropped
        assert "Student request (Ben)" in text

    def test_style_is_appended_to_system_prompt(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "", state.last_at)
        prompt = assemble_prompt(orc.profiles["planning"], _request(state), ctx)
        assert prompt.system.startswith(orc.profiles["planning"].system_prompt)
        assert "Style:" in prompt.system


class TestHandleRequest:
    def test_orchestrated_reply_records_intent_and_request_seq(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        reply = orc.handle_request(_request(state), ctx)
        assert reply.agent_id == "knowledge"
        assert reply.intent == "knowledge"
        assert reply.request_seq == state.last_seq
        assert reply.body.startswith("Knowledge answer:")

    def test_generic_mode_uses_assistant_without_intent(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        reply = orc.handle_request(_request(state), ctx, mode=Mode.GENERIC)
        assert reply.agent_id == GENERIC_AGENT_ID
        assert reply.intent is None
        assert reply.body.startswith("Assistant reply:")

    def test_provider_failure_yields_apology(self):
        class FailingProvider:
            def complete(self, prompt, timeout_s=None):
                return ProviderTimeout("downstream is gone")

        orc = Orchestrator(FailingProvider())
        state, _ = _state()
        ctx = build_snapshot(state, "", state.last_at)
        reply = orc.handle_request(_request(state), ctx)
        assert reply.body == APOLOGY_TEXT
        assert reply.agent_id in SPECIALIST_AGENT_IDS

    def test_blank_completion_yields_apology(self):
        class BlankProvider:
            def complete(self, prompt, timeout_s=None):
                if prompt.label_constraint:
                    return "Knowledge"
                return "   "

        orc = Orchestrator(BlankProvider())
        state, _ = _state()
        ctx = build_snapshot(state, "", state.last_at)
        assert orc.handle_request(_request(state), ctx).body == APOLOGY_TEXT

    def test_same_request_same_reply(self, orc):
        state, _ = _state()
        ctx = build_snapshot(state, "build a bridge", state.last_at)
        assert orc.handle_request(_request(state), ctx) == orc.handle_request(_request(state), ctx)


def test_classification_labels_match_intents():
    assert {label.lower() for label in CLASSIFICATION_LABELS} == {i.value for i in Intent}
