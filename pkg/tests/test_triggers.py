"""Detector boundary tests for the lightbulb engine, plus oracle cross-checks."""

from __future__ import annotations

import json

import pytest

from teamroom.config import TriggerParams
from teamroom.model import (
    AgentReply, Chat, Join, NoteCreate, NoteKind, Position, SessionEvent,
    TriggerKind, fold,
)
from teamroom.provider import MockProvider, ProviderTimeout
from teamroom.synth import generate, random_scenario
from teamroom.triggers import (
    CooldownGate, LightbulbEngine, Metrics, intervene,
    load_intervention_templates, oracle_scan, render_intervention,
    stream_detections, tick_times,
)

T0 = 1_000_000_000_000


def _at(seconds: float) -> int:
    return T0 + int(seconds * 1000)


class _Feed:
    """Feeds a fresh engine a timeline of payloads with auto sequence numbers."""

    def __init__(self, params: TriggerParams | None = None):
        self.engine = LightbulbEngine(params or TriggerParams())
        self.seq = 0
        self.firings = []

    def event(self, seconds: float, payload) -> None:
        self.seq += 1
        self.firings += self.engine.observe(SessionEvent(self.seq, _at(seconds), payload))

    def tick(self, seconds: float) -> None:
        self.firings += self.engine.tick(_at(seconds))

    def of_kind(self, kind: TriggerKind):
        return [f for f in self.firings if f.kind == kind]


class TestInactivity:
    def test_fires_at_threshold_not_before(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(20, Chat("p2", "hello team"))
        feed.tick(179)
        assert feed.of_kind(TriggerKind.INACTIVITY) == []
        feed.tick(180)
        fired = feed.of_kind(TriggerKind.INACTIVITY)
        assert [f.target for f in fired] == ["p1"]
        assert fired[0].evidence.stat_name == "silent_s"
        assert fired[0].evidence.stat_value == pytest.approx(180.0)

    def test_two_hundred_seconds_of_silence_fires(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(30, Chat("p2", "sketching the deck now"))
        feed.tick(200)
        assert [f.target for f in feed.of_kind(TriggerKind.INACTIVITY)] == ["p1"]

    def test_group_pause_never_fires(self):
        # everyone stops at the same moment: no peer acted after anyone
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "brainstorm time"))
        feed.event(10, Chat("p2", "same here"))
        feed.tick(400)
        assert feed.of_kind(TriggerKind.INACTIVITY) == []

    def test_staggered_pause_targets_only_the_earlier_member(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "my idea first"))
        feed.event(12, Chat("p2", "then mine"))
        feed.tick(195)
        assert [f.target for f in feed.of_kind(TriggerKind.INACTIVITY)] == ["p1"]

    def test_needs_at_least_two_members(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.tick(400)
        assert feed.of_kind(TriggerKind.INACTIVITY) == []

    def test_own_activity_resets_the_clock(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(170, NoteCreate("n1", "p1", NoteKind.TEXT, "late note", Position(0, 0)))
        feed.event(175, Chat("p2", "nice one"))
        feed.tick(200)
        assert feed.of_kind(TriggerKind.INACTIVITY) == []


class TestFrustration:
    def test_lexicon_match_is_case_insensitive(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(5, Chat("p2", "I GIVE UP on this part"))
        fired = feed.of_kind(TriggerKind.FRUSTRATION)
        assert [f.target for f in fired] == ["p2"]
        assert fired[0].evidence.seq_from == fired[0].evidence.seq_to == 3
        assert fired[0].evidence.stat_name == "lexicon_match"
        assert fired[0].evidence.stat_value == 1.0

    def test_first_lexicon_phrase_wins(self):
        params = TriggerParams(frustration_lexicon=("too hard", "give up"))
        feed = _Feed(params)
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(5, Chat("p1", "i give up, this is too hard"))
        fired = feed.of_kind(TriggerKind.FRUSTRATION)
        assert len(fired) == 1
        assert 'contains "too hard"' in fired[0].detail

    def test_plain_chat_does_not_fire(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(5, Chat("p1", "let's try the second design"))
        assert feed.of_kind(TriggerKind.FRUSTRATION) == []

    def test_agent_replies_are_never_frustrated(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(5, AgentReply("knowledge", "do not give up, keep going"))
        assert feed.of_kind(TriggerKind.FRUSTRATION) == []


class TestParticipationDecline:
    def _busy_then_quiet(self, curr_actions: int) -> _Feed:
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0.5, Join("p2", "Ben"))
        # previous window (120s, 240s]: exactly 10 actions
        for i in range(10):
            author = "p1" if i % 2 == 0 else "p2"
            feed.event(130 + 10 * i, Chat(author, f"busy line {i}"))
        # current window (240s, 360s]: curr_actions actions, ending with a
        # whiteboard change so a progress stall cannot muddy the assertion
        for i in range(curr_actions - 1):
            feed.event(250 + 10 * i, Chat("p1", f"quiet line {i}"))
        if curr_actions:
            feed.event(340, NoteCreate("n1", "p2", NoteKind.TEXT, "deck", Position(0, 0)))
        return feed

    def test_drop_from_ten_to_four_fires(self):
        feed = self._busy_then_quiet(4)
        feed.tick(360)
        fired = feed.of_kind(TriggerKind.PARTICIPATION_DECLINE)
        assert len(fired) == 1
        assert fired[0].target is None
        assert fired[0].evidence.stat_name == "window_ratio"
        assert fired[0].evidence.stat_value == pytest.approx(0.4)

    def test_drop_from_ten_to_five_does_not_fire(self):
        feed = self._busy_then_quiet(5)
        feed.tick(360)
        assert feed.of_kind(TriggerKind.PARTICIPATION_DECLINE) == []

    def test_previous_window_floor_suppresses_noise(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0.5, Join("p2", "Ben"))
        feed.event(130, Chat("p1", "one"))
        feed.event(150, Chat("p2", "two"))
        feed.event(170, NoteCreate("n1", "p1", NoteKind.TEXT, "deck", Position(0, 0)))
        feed.tick(360)  # prev=3 < floor of 4, even though curr=0
        assert feed.of_kind(TriggerKind.PARTICIPATION_DECLINE) == []

    def test_quiet_before_two_full_windows_never_fires(self):
        feed = self._busy_then_quiet(0)
        feed.tick(239)
        assert feed.of_kind(TriggerKind.PARTICIPATION_DECLINE) == []


class TestProgressStall:
    def test_chat_without_whiteboard_change_fires(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "what if we double the base"))
        feed.tick(300)
        fired = feed.of_kind(TriggerKind.PROGRESS_STALL)
        assert len(fired) == 1
        assert fired[0].target is None
        assert fired[0].evidence.stat_value == pytest.approx(300.0)

    def test_pure_silence_is_not_a_stall(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.tick(400)
        assert feed.of_kind(TriggerKind.PROGRESS_STALL) == []

    def test_whiteboard_change_resets_the_span(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "thinking out loud"))
        feed.event(299, NoteCreate("n1", "p1", NoteKind.TEXT, "pier", Position(0, 0)))
        feed.tick(300)
        assert feed.of_kind(TriggerKind.PROGRESS_STALL) == []
        # chat older than the whiteboard change does not count either
        feed.tick(605)
        assert feed.of_kind(TriggerKind.PROGRESS_STALL) == []
        # a fresh chat completes the pattern right away: 321s since the note
        feed.event(620, Chat("p2", "now we are just talking"))
        stalls = feed.of_kind(TriggerKind.PROGRESS_STALL)
        assert len(stalls) == 1
        assert stalls[0].at == _at(620)
        assert stalls[0].evidence.stat_value == pytest.approx(321.0)


class TestCooldown:
    def test_gate_suppresses_within_window_and_readmits_after(self):
        gate = CooldownGate(300_000)
        assert gate.admit(TriggerKind.FRUSTRATION, "p1", _at(0))
        assert not gate.admit(TriggerKind.FRUSTRATION, "p1", _at(100))
        assert gate.admit(TriggerKind.FRUSTRATION, "p1", _at(301))

    def test_kinds_and_targets_are_independent(self):
        gate = CooldownGate(300_000)
        assert gate.admit(TriggerKind.FRUSTRATION, "p1", _at(0))
        assert gate.admit(TriggerKind.FRUSTRATION, "p2", _at(1))
        assert gate.admit(TriggerKind.INACTIVITY, "p1", _at(2))
        assert gate.admit(TriggerKind.PROGRESS_STALL, None, _at(3))

    def test_suppressed_attempts_do_not_extend_the_window(self):
        gate = CooldownGate(300_000)
        assert gate.admit(TriggerKind.INACTIVITY, "p1", _at(0))
        assert not gate.admit(TriggerKind.INACTIVITY, "p1", _at(299))
        assert gate.admit(TriggerKind.INACTIVITY, "p1", _at(300))

    def test_engine_counts_suppressions_in_metrics(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "i am stuck"))
        feed.event(110, Chat("p1", "still stuck"))      # 100s later: suppressed
        feed.event(320, Chat("p1", "stuck again"))      # 310s later: fires
        assert len(feed.of_kind(TriggerKind.FRUSTRATION)) == 2
        counts = feed.engine.metrics.to_dict()
        assert counts["fired"]["frustration"] == 2
        assert counts["suppressed"]["frustration"] == 1


def test_frustration_evaluates_before_time_based_kinds():
    feed = _Feed()
    feed.event(0, Join("p1", "Ava"))
    feed.event(0, Join("p2", "Ben"))
    feed.event(185, Chat("p2", "this is too hard"))
    kinds = [f.kind for f in feed.firings]
    assert kinds == [TriggerKind.FRUSTRATION, TriggerKind.INACTIVITY]


def test_tick_times_align_to_session_start():
    assert tick_times(1000, 16000, 5.0) == [6000, 11000, 16000]
    assert tick_times(1000, 15999, 5.0) == [6000, 11000]
    assert tick_times(1000, 1000, 5.0) == []
    assert tick_times(0, 1000, 0.3) == [300, 600, 900]


def test_metrics_dict_is_zero_filled():
    counts = Metrics().to_dict()
    for kind in TriggerKind:
        assert counts["fired"][kind.value] == 0
        assert counts["suppressed"][kind.value] == 0


class TestStreamAndOracleAgree:
    def test_empty_log(self):
        params = TriggerParams()
        firings, metrics = stream_detections([], params)
        assert firings == []
        assert oracle_scan([], params) == []
        assert metrics.to_dict() == Metrics().to_dict()

    def test_single_frustration_log(self):
        events = [
            SessionEvent(1, _at(0), Join("p1", "Ava")),
            SessionEvent(2, _at(0), Join("p2", "Ben")),
            SessionEvent(3, _at(5), Chat("p1", "this makes no sense")),
        ]
        params = TriggerParams()
        streamed, _ = stream_detections(events, params)
        assert [f.kind for f in streamed] == [TriggerKind.FRUSTRATION]
        assert oracle_scan(events, params) == streamed

    def test_handcrafted_timeline_matches_exactly(self):
        events = []
        seq = 0

        def add(seconds, payload):
            nonlocal seq
            seq += 1
            events.append(SessionEvent(seq, _at(seconds), payload))

        add(0, Join("p1", "Ava"))
        add(1, Join("p2", "Ben"))
        add(2, Join("p3", "Caro"))
        for i in range(8):
            add(20 + 12 * i, Chat("p2" if i % 2 else "p3", f"busy {i}"))
        add(130, NoteCreate("n1", "p2", NoteKind.TEXT, "tower", Position(1, 1)))
        add(200, Chat("p3", "i'm lost with these rules"))
        add(430, Chat("p2", "anyone here?"))
        add(700, Chat("p3", "we should keep moving"))

        params = TriggerParams()
        streamed, _ = stream_detections(events, params)
        assert streamed == oracle_scan(events, params)
        kinds = {f.kind for f in streamed}
        assert TriggerKind.FRUSTRATION in kinds
        assert TriggerKind.INACTIVITY in kinds

    def test_generated_logs_match_across_seeds(self):
        params = TriggerParams()
        for seed in (3, 17, 99):
            events = generate(random_scenario(seed), seed)
            streamed, stream_metrics = stream_detections(events, params)
            oracle_metrics = Metrics()
            assert oracle_scan(events, params, metrics=oracle_metrics) == streamed
            assert oracle_metrics.to_dict() == stream_metrics.to_dict()


class TestInterventions:
    def _flashing_state(self):
        events = [
            SessionEvent(1, _at(0), Join("p1", "Ava")),
            SessionEvent(2, _at(0), Join("p2", "Ben")),
            SessionEvent(3, _at(5), NoteCreate("n1", "p1", NoteKind.TEXT,
                                               "triangle base", Position(0, 0))),
            SessionEvent(4, _at(9), Chat("p2", "hm")),
        ]
        return fold(events)

    def _firing(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(20, Chat("p2", "hello"))
        feed.tick(200)
        return feed.of_kind(TriggerKind.INACTIVITY)[0]

    def test_packaged_templates_cover_every_kind(self):
        templates = load_intervention_templates()
        assert set(templates) == {k.value for k in TriggerKind}

    def test_config_dir_with_missing_kind_is_rejected(self, tmp_path):
        (tmp_path / "interventions.json").write_text(
            json.dumps({"inactivity": "x", "frustration": "y"}), "utf-8")
        with pytest.raises(ValueError):
            load_intervention_templates(tmp_path)

    def test_render_names_the_member_and_their_note(self):
        message = render_intervention(self._firing(), self._flashing_state(),
                                      load_intervention_templates())
        assert "Ava" in message
        assert '"triangle base"' in message

    def test_render_for_group_kind_addresses_the_team(self):
        feed = _Feed()
        feed.event(0, Join("p1", "Ava"))
        feed.event(0, Join("p2", "Ben"))
        feed.event(10, Chat("p1", "chatty chat"))
        feed.tick(300)
        firing = feed.of_kind(TriggerKind.PROGRESS_STALL)[0]
        message = render_intervention(firing, self._flashing_state(),
                                      load_intervention_templates())
        assert firing.target is None
        assert "whiteboard" in message

    def test_render_without_notes_falls_back_to_plain_reference(self):
        state = fold([SessionEvent(1, _at(0), Join("p1", "Ava")),
                      SessionEvent(2, _at(0), Join("p2", "Ben"))])
        message = render_intervention(self._firing(), state, load_intervention_templates())
        assert "the whiteboard" in message

    def test_intervene_builds_a_valid_payload(self):
        firing = self._firing()
        payload = intervene(firing, self._flashing_state(), load_intervention_templates())
        assert payload.kind is TriggerKind.INACTIVITY
        assert payload.target == "p1"
        assert payload.evidence == firing.evidence
        assert "Ava" in payload.message

    def test_provider_elaboration_is_used_when_available(self):
        payload = intervene(self._firing(), self._flashing_state(),
                            load_intervention_templates(), provider=MockProvider())
        assert "stronger when everyone pitches in" in payload.message

    def test_provider_failure_falls_back_to_template(self):
        class FailingProvider:
            def complete(self, prompt, timeout_s=None):
                return ProviderTimeout("nope")

        templates = load_intervention_templates()
        plain = intervene(self._firing(), self._flashing_state(), templates)
        with_failure = intervene(self._firing(), self._flashing_state(), templates,
                                 provider=FailingProvider())
        assert with_failure.message == plain.message
