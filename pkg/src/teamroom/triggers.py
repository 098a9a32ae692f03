"""Proactive lightbulb engine: trigger detection and interventions.

Four detectors watch the serialized event stream for patterns that impede
group progress: an individually inactive member, an expression of
frustration in chat, a group-wide participation decline, and talk without
whiteboard progress. Detectors are evaluated at every participant event and
on a periodic tick (so time-based triggers fire during silence); a
per-(kind, target) cooldown keeps nudges from repeating.

Two implementations live here on purpose. LightbulbEngine is the streaming,
incremental one the gateway runs. oracle_scan is a non-incremental
brute-force re-evaluation over the raw event list, used by tests and the
replay CLI to check the engine; keep them independent.

All predicates are memoryless functions of (event history, evaluation time),
which is what makes the two paths comparable:

  inactivity(p):  T - last_activity(p) >= t_inactive  and some other member
                  acted in (last_activity(p), T]; needs >= 2 joined members
  frustration:    a student chat body contains a lexicon phrase
                  (case-insensitive substring)
  decline:        group activity count in (T-w, T] < ratio * count in
                  (T-2w, T-w], with the previous count >= min_prev_rate;
                  needs session age >= 2w
  stall:          no whiteboard change for >= t_stall since the last one
                  (or session start) while chat happened in that span

Joins count as activity; agent-authored events never do.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .config import TriggerParams
from .model import (
    Chat, Evidence, Join, SessionEvent, SessionState, TriggerFired,
    TriggerKind, event_author, is_participant_event, is_whiteboard_event,
)
from .provider import Provider, ProviderPrompt


@dataclass(frozen=True)
class TriggerFiring:
    """A detected triggering event that passed cooldown."""

    kind: TriggerKind
    target: str | None          # participant, or None for the whole group
    at: int                     # ms
    evidence: Evidence
    detail: str                 # human-readable statistic for templates
    message: str = ""           # intervention text, filled by intervene()


@dataclass
class Metrics:
    """Per-kind counts of passed and cooldown-suppressed firings."""

    fired: dict[str, int] = field(default_factory=dict)
    suppressed: dict[str, int] = field(default_factory=dict)

    def record(self, kind: TriggerKind, passed: bool) -> None:
        bucket = self.fired if passed else self.suppressed
        bucket[kind.value] = bucket.get(kind.value, 0) + 1

    def to_dict(self) -> dict:
        kinds = [k.value for k in TriggerKind]
        return {
            "fired": {k: self.fired.get(k, 0) for k in kinds},
            "suppressed": {k: self.suppressed.get(k, 0) for k in kinds},
        }


class CooldownGate:
    """Suppress a firing when the same (kind, target) passed within cooldown."""

    def __init__(self, cooldown_ms: float):
        self.cooldown_ms = cooldown_ms
        self._last_pass: dict[tuple[TriggerKind, str | None], int] = {}

    def admit(self, kind: TriggerKind, target: str | None, at: int) -> bool:
        last = self._last_pass.get((kind, target))
        if last is not None and at - last < self.cooldown_ms:
            return False
        self._last_pass[(kind, target)] = at
        return True

    def note_pass(self, kind: TriggerKind, target: str | None, at: int) -> None:
        """Record an externally known pass (a logged firing seen on replay)."""
        key = (kind, target)
        if at > self._last_pass.get(key, -1):
            self._last_pass[key] = at


def _match_frustration(body: str, lexicon: tuple[str, ...]) -> str | None:
    lowered = body.lower()
    for phrase in lexicon:
        if phrase in lowered:
            return phrase
    return None


class LightbulbEngine:
    """Streaming detector stack for one session.

    Feed every admitted event through observe(); call tick() on the timer.
    Both return the firings that passed cooldown, ready for intervene().
    """

    def __init__(self, params: TriggerParams):
        self.params = params
        self.metrics = Metrics()
        self._gate = CooldownGate(params.cooldown_s * 1000.0)
        self._t0: tuple[int, int] | None = None              # (at, seq) of first event
        self._last_seq = 0
        self._join_order: list[str] = []
        self._last_activity: dict[str, tuple[int, int]] = {}  # pid -> (at, seq)
        self._activity: deque[tuple[int, int]] = deque()      # (at, seq), pruned to 2w
        self._last_wb: tuple[int, int] | None = None
        self._last_chat: tuple[int, int] | None = None

    def observe(self, event: SessionEvent) -> list[TriggerFiring]:
        """Ingest one admitted event; evaluate detectors at its timestamp."""
        if self._t0 is None:
            self._t0 = (event.at, event.seq)
        self._last_seq = max(self._last_seq, event.seq)
        if not is_participant_event(event):
            if isinstance(event.payload, TriggerFired):
                # Replaying a log after a restart: the nudge already went
                # out, so its cooldown must hold across the resume.
                self._gate.note_pass(event.payload.kind, event.payload.target, event.at)
            return []

        pid = event_author(event)
        at = event.at
        if isinstance(event.payload, Join):
            self._join_order.append(pid)
        self._last_activity[pid] = (at, event.seq)
        self._activity.append((at, event.seq))
        self._prune(at)
        if is_whiteboard_event(event):
            self._last_wb = (at, event.seq)
        if isinstance(event.payload, Chat):
            self._last_chat = (at, event.seq)

        firings: list[TriggerFiring] = []
        if isinstance(event.payload, Chat):
            firings += self._frustration(event)
        firings += self._time_based(at)
        return firings

    def tick(self, now_ms: int) -> list[TriggerFiring]:
        """Evaluate time-based detectors during silence."""
        if self._t0 is None:
            return []
        return self._time_based(now_ms)

    def _gated(self, firing: TriggerFiring) -> TriggerFiring | None:
        passed = self._gate.admit(firing.kind, firing.target, firing.at)
        self.metrics.record(firing.kind, passed)
        return firing if passed else None

    def _prune(self, now_ms: int) -> None:
        horizon = now_ms - 2 * self.params.w_participation_s * 1000.0
        while self._activity and self._activity[0][0] <= horizon:
            self._activity.popleft()

    def _time_based(self, now_ms: int) -> list[TriggerFiring]:
        firings = []
        firings += self._inactivity(now_ms)
        firings += self._decline(now_ms)
        firings += self._stall(now_ms)
        return firings

    def _frustration(self, event: SessionEvent) -> list[TriggerFiring]:
        phrase = _match_frustration(event.payload.body, self.params.frustration_lexicon)
        if phrase is None:
            return []
        firing = TriggerFiring(
            TriggerKind.FRUSTRATION, event.payload.author, event.at,
            Evidence(event.seq, event.seq, "lexicon_match", 1.0),
            detail=f'the message contains "{phrase}"')
        passed = self._gated(firing)
        return [passed] if passed else []

    def _inactivity(self, now_ms: int) -> list[TriggerFiring]:
        if len(self._join_order) < 2:
            return []
        threshold = self.params.t_inactive_s * 1000.0
        out = []
        for pid in self._join_order:
            last_at, last_seq = self._last_activity[pid]
            silent = now_ms - last_at
            if silent < threshold:
                continue
            peers_acted = any(
                self._last_activity[q][0] > last_at
                for q in self._join_order if q != pid)
            if not peers_acted:
                continue
            firing = TriggerFiring(
                TriggerKind.INACTIVITY, pid, now_ms,
                Evidence(last_seq, self._last_seq, "silent_s", silent / 1000.0),
                detail=f"about {silent / 60000.0:.0f} min without a contribution "
                       f"while teammates kept going")
            passed = self._gated(firing)
            if passed:
                out.append(passed)
        return out

    def _decline(self, now_ms: int) -> list[TriggerFiring]:
        w_ms = self.params.w_participation_s * 1000.0
        if self._t0 is None or now_ms - self._t0[0] < 2 * w_ms:
            return []
        self._prune(now_ms)
        curr = sum(1 for at, _ in self._activity if at > now_ms - w_ms)
        prev = len(self._activity) - curr
        if prev < self.params.min_prev_rate:
            return []
        if not curr < self.params.decline_ratio * prev:
            return []
        firing = TriggerFiring(
            TriggerKind.PARTICIPATION_DECLINE, None, now_ms,
            Evidence(self._activity[0][1], self._last_seq, "window_ratio",
                     curr / prev),
            detail=f"group activity fell from {prev} to {curr} actions between "
                   f"the last two {self.params.w_participation_s:.0f}s windows")
        passed = self._gated(firing)
        return [passed] if passed else []

    def _stall(self, now_ms: int) -> list[TriggerFiring]:
        if self._t0 is None:
            return []
        ref_at, ref_seq = self._last_wb if self._last_wb is not None else self._t0
        stalled = now_ms - ref_at
        if stalled < self.params.t_stall_s * 1000.0:
            return []
        if self._last_chat is None or self._last_chat[0] <= ref_at:
            return []
        firing = TriggerFiring(
            TriggerKind.PROGRESS_STALL, None, now_ms,
            Evidence(ref_seq, self._last_seq, "stalled_s", stalled / 1000.0),
            detail=f"about {stalled / 60000.0:.0f} min of chat without a "
                   f"whiteboard change")
        passed = self._gated(firing)
        return [passed] if passed else []


def tick_times(t0: int, end_ms: int, tick_s: float) -> list[int]:
    """Evaluation instants of the periodic timer, aligned to session start."""
    tick_ms = tick_s * 1000.0
    out = []
    k = 1
    while True:
        t = t0 + int(round(k * tick_ms))
        if t > end_ms:
            return out
        out.append(t)
        k += 1


def stream_detections(events: list[SessionEvent], params: TriggerParams,
                      end_ms: int | None = None) -> tuple[list[TriggerFiring], Metrics]:
    """Run the streaming engine over a finished log, interleaving timer ticks.

    Ticks are aligned to the first event and processed after any event that
    shares their timestamp; detection stops at the last event (or end_ms).
    """
    engine = LightbulbEngine(params)
    if not events:
        return [], engine.metrics
    t0 = events[0].at
    end = end_ms if end_ms is not None else events[-1].at
    ticks = deque(tick_times(t0, end, params.tick_s))

    firings: list[TriggerFiring] = []
    for event in events:
        while ticks and ticks[0] < event.at:
            firings += engine.tick(ticks.popleft())
        firings += engine.observe(event)
    while ticks:
        firings += engine.tick(ticks.popleft())
    return firings, engine.metrics


def oracle_scan(events: list[SessionEvent], params: TriggerParams,
                end_ms: int | None = None,
                metrics: Metrics | None = None) -> list[TriggerFiring]:
    """Brute-force reference detection over a complete log.

    For every evaluation instant (each participant event, each timer tick),
    re-derive all four predicates from the raw event list via fresh lookups,
    then apply cooldowns. Non-incremental on purpose: this is the oracle the
    streaming engine is checked against.
    """
    if not events:
        return []
    t0_at, t0_seq = events[0].at, events[0].seq
    end = end_ms if end_ms is not None else events[-1].at

    pe = [e for e in events if is_participant_event(e)]
    pe_times = [e.at for e in pe]
    pid_positions: dict[str, list[int]] = {}
    join_pos: dict[str, int] = {}
    join_order: list[str] = []
    wb_positions: list[int] = []
    for i, e in enumerate(pe):
        pid = event_author(e)
        pid_positions.setdefault(pid, []).append(i)
        if isinstance(e.payload, Join) and pid not in join_pos:
            join_pos[pid] = i
            join_order.append(pid)
        if is_whiteboard_event(e):
            wb_positions.append(i)
    chat_positions = [i for i, e in enumerate(pe) if isinstance(e.payload, Chat)]

    t_inactive_ms = params.t_inactive_s * 1000.0
    w_ms = params.w_participation_s * 1000.0
    t_stall_ms = params.t_stall_s * 1000.0
    cooldown_ms = params.cooldown_s * 1000.0
    last_pass: dict[tuple[TriggerKind, str | None], int] = {}
    firings: list[TriggerFiring] = []

    def admit(firing: TriggerFiring) -> None:
        key = (firing.kind, firing.target)
        last = last_pass.get(key)
        passed = last is None or firing.at - last >= cooldown_ms
        if metrics is not None:
            metrics.record(firing.kind, passed)
        if passed:
            last_pass[key] = firing.at
            firings.append(firing)

    def last_position(positions: list[int], n: int) -> int | None:
        """Largest index in positions strictly below n."""
        lo = bisect_right(positions, n - 1)
        return positions[lo - 1] if lo else None

    def evaluate(T: int, n: int, last_seq: int, current) -> None:
        """Evaluate all predicates at time T with participant prefix pe[:n]."""
        # frustration: only for the chat event that just arrived
        if current is not None and isinstance(current.payload, Chat):
            phrase = _match_frustration(current.payload.body, params.frustration_lexicon)
            if phrase is not None:
                admit(TriggerFiring(
                    TriggerKind.FRUSTRATION, current.payload.author, T,
                    Evidence(current.seq, current.seq, "lexicon_match", 1.0),
                    detail=f'the message contains "{phrase}"'))

        joined = [pid for pid in join_order if join_pos[pid] < n]
        if len(joined) >= 2:
            for pid in joined:
                i = last_position(pid_positions[pid], n)
                last_at, last_seq_p = pe[i].at, pe[i].seq
                silent = T - last_at
                if silent < t_inactive_ms:
                    continue
                peers_acted = False
                for q in joined:
                    if q == pid:
                        continue
                    j = last_position(pid_positions[q], n)
                    if j is not None and pe[j].at > last_at:
                        peers_acted = True
                        break
                if peers_acted:
                    admit(TriggerFiring(
                        TriggerKind.INACTIVITY, pid, T,
                        Evidence(last_seq_p, last_seq, "silent_s", silent / 1000.0),
                        detail=f"about {silent / 60000.0:.0f} min without a "
                               f"contribution while teammates kept going"))

        if T - t0_at >= 2 * w_ms:
            older = bisect_right(pe_times, T - 2 * w_ms, 0, n)
            mid = bisect_right(pe_times, T - w_ms, 0, n)
            prev = mid - older
            curr = n - mid
            if prev >= params.min_prev_rate and curr < params.decline_ratio * prev:
                admit(TriggerFiring(
                    TriggerKind.PARTICIPATION_DECLINE, None, T,
                    Evidence(pe[older].seq, last_seq, "window_ratio", curr / prev),
                    detail=f"group activity fell from {prev} to {curr} actions "
                           f"between the last two {params.w_participation_s:.0f}s windows"))

        i = last_position(wb_positions, n)
        ref_at, ref_seq = (pe[i].at, pe[i].seq) if i is not None else (t0_at, t0_seq)
        stalled = T - ref_at
        if stalled >= t_stall_ms:
            j = last_position(chat_positions, n)
            if j is not None and pe[j].at > ref_at:
                admit(TriggerFiring(
                    TriggerKind.PROGRESS_STALL, None, T,
                    Evidence(ref_seq, last_seq, "stalled_s", stalled / 1000.0),
                    detail=f"about {stalled / 60000.0:.0f} min of chat without "
                           f"a whiteboard change"))

    ticks = deque(tick_times(t0_at, end, params.tick_s))
    n = 0
    last_seq = 0
    for event in events:
        while ticks and ticks[0] < event.at:
            evaluate(ticks.popleft(), n, last_seq, current=None)
        last_seq = event.seq
        if is_participant_event(event):
            n += 1
            evaluate(event.at, n, last_seq, current=event)
    while ticks:
        evaluate(ticks.popleft(), n, last_seq, current=None)
    return firings


# --- interventions --------------------------------------------------------

def load_intervention_templates(config_dir: str | Path | None = None) -> dict[str, str]:
    """Per-kind intervention templates ({name}, {detail}, {last_note})."""
    if config_dir is not None and (Path(config_dir) / "interventions.json").exists():
        raw = json.loads((Path(config_dir) / "interventions.json").read_text("utf-8"))
    else:
        raw = json.loads(
            resources.files("teamroom").joinpath("profiles/interventions.json").read_text("utf-8"))
    missing = [k.value for k in TriggerKind if k.value not in raw]
    if missing:
        raise ValueError(f"intervention templates missing kinds: {missing}")
    return {k.value: str(raw[k.value]) for k in TriggerKind}


def _latest_note(state: SessionState, target: str | None):
    candidates = [n for n in state.notes.values() if target is None or n.author == target]
    if not candidates:
        candidates = list(state.notes.values())
    if not candidates:
        return None
    return max(candidates, key=lambda n: (n.updated_at, n.note_id))


def render_intervention(firing: TriggerFiring, state: SessionState,
                        templates: dict[str, str]) -> str:
    """Fill the per-kind template from session state; no provider involved."""
    if firing.target is not None and firing.target in state.participants:
        name = state.participants[firing.target].display_name
    else:
        name = "team"
    note = _latest_note(state, firing.target)
    last_note = f'"{note.content}"' if note is not None else "the whiteboard"
    return templates[firing.kind.value].format(
        name=name, detail=firing.detail, last_note=last_note)


def intervene(firing: TriggerFiring, state: SessionState, templates: dict[str, str],
              provider: Provider | None = None,
              timeout_s: float = 2.0) -> TriggerFired:
    """Build the TriggerFired payload for a passed firing.

    The provider may elaborate the templated draft (it sees the target's
    whiteboard contribution through the template); any failure falls back to
    the template verbatim, so an intervention is never blocked on the model.
    """
    message = render_intervention(firing, state, templates)
    if provider is not None:
        prompt = ProviderPrompt(
            system=("You are the lightbulb facilitator in a group learning room: "
                    "a warm, encouraging coach for ten-year-olds. Rewrite the "
                    "draft nudge in at most two sentences, keeping its meaning."),
            user_turns=(("user", f"Draft: {message}"),),
            max_tokens=96,
        )
        result = provider.complete(prompt, timeout_s=timeout_s)
        if isinstance(result, str) and result.strip():
            message = result
    return TriggerFired(firing.kind, firing.target, message, firing.evidence)
