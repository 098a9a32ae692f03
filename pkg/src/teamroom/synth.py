"""Synthetic session logs for tests and offline experiments.

A scenario is a participant count, a total duration, and a list of behavior
phases. Phases model the situations the trigger detectors care about:

  active      everyone contributes at a steady rate
  quiet       one member goes silent while the rest keep working
  frustrated  like active, plus one frustrated chat message early on
  decline     a burst of activity followed by a sharp drop
  stall       chat continues but nobody touches the whiteboard
  silent      nobody does anything

Generation is driven by a single seeded random.Random, builds every event
through apply_event (so an invalid log cannot be emitted), and writes plain
JSONL via the event log codec. Same scenario + same seed gives identical
bytes.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .model import (
    Chat, Join, LinkCreate, LinkDelete, NoteCreate, NoteDelete, NoteKind,
    NoteUpdate, Position, SessionEvent, apply_event, empty_state,
)

START_AT_MS = 1_000_000_000_000  # fixed epoch so identical seeds give identical bytes

PHASE_KINDS = ("active", "quiet", "frustrated", "decline", "stall", "silent")

DISPLAY_NAMES = (
    "Ava", "Ben", "Chloe", "Dan", "Ellie", "Finn",
    "Grace", "Hugo", "Iris", "Jack", "Kira", "Liam",
)

# Kept clear of the frustration lexicon; test_synth checks the separation.
SAFE_CHAT = (
    "what if we add a ramp here",
    "nice, that works",
    "let me sketch the base first",
    "should the tower be taller?",
    "i like that idea",
    "can you move it left a bit",
    "let's test it with the marble",
    "the bridge needs another support",
    "good point, adding it now",
    "maybe glue the corners before the roof",
    "i will write that down",
    "we could color the roof",
    "that looks better already",
    "try putting the fan on top",
    "the wheels need to be bigger",
    "ok doing it now",
)

BOSS_MENTIONS = (
    "@boss what materials are waterproof?",
    "@boss how should we divide the work?",
    "@boss how are we doing on time?",
    "@boss what went well today?",
    "@boss which shape holds the most weight?",
)

FRUSTRATED_LINES = (
    "i give up on this part",
    "i don't understand this at all",
    "this is really confusing",
    "this piece is too hard for me",
)

NOTE_TEXTS = (
    "base: cardboard square",
    "walls need tape",
    "ramp angle 30",
    "marble run start",
    "roof idea: triangle",
    "glue dries in 5 min",
    "test after each change",
    "materials: straws, clay",
    "tower plan b",
    "door goes on the left",
)


class BadSpec(ValueError):
    """The scenario description cannot produce a valid session."""


@dataclass(frozen=True)
class Phase:
    kind: str
    duration_s: float

    def __post_init__(self):
        if self.kind not in PHASE_KINDS:
            raise BadSpec(f"unknown phase kind {self.kind!r} (have {PHASE_KINDS})")
        if self.duration_s <= 0:
            raise BadSpec(f"phase duration must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class Scenario:
    name: str
    participants: int
    duration_s: float
    phases: tuple[Phase, ...]

    def __post_init__(self):
        if self.participants < 2:
            raise BadSpec("need at least 2 participants (inactivity watches peers)")
        if self.participants > len(DISPLAY_NAMES):
            raise BadSpec(f"at most {len(DISPLAY_NAMES)} participants supported")
        if self.duration_s <= 0:
            raise BadSpec("duration must be positive")
        if not self.phases:
            raise BadSpec("scenario needs at least one phase")

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise BadSpec("scenario must be a JSON object")
        try:
            phases = tuple(
                Phase(str(p["kind"]), float(p["duration_s"])) for p in raw["phases"])
            return cls(
                name=str(raw.get("name", "custom")),
                participants=int(raw["participants"]),
                duration_s=float(raw["duration_s"]),
                phases=phases,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, BadSpec):
                raise
            raise BadSpec(f"bad scenario spec: {exc}") from exc


PRESETS: dict[str, Scenario] = {
    "baseline": Scenario("baseline", 4, 900, (Phase("active", 900),)),
    "quiet-member": Scenario("quiet-member", 5, 900, (
        Phase("active", 300), Phase("quiet", 400), Phase("active", 200))),
    "frustration": Scenario("frustration", 4, 600, (
        Phase("active", 200), Phase("frustrated", 200), Phase("active", 200))),
    "decline": Scenario("decline", 4, 900, (
        Phase("active", 300), Phase("decline", 420), Phase("active", 180))),
    "stall": Scenario("stall", 4, 900, (
        Phase("active", 240), Phase("stall", 480), Phase("active", 180))),
    "mixed": Scenario("mixed", 5, 1800, (
        Phase("active", 300), Phase("quiet", 400), Phase("frustrated", 200),
        Phase("stall", 500), Phase("decline", 400))),
}


def load_scenario(name_or_path: str, participants: int | None = None,
                  duration_s: float | None = None) -> Scenario:
    """Resolve a preset name or a JSON file, with optional field overrides."""
    if name_or_path in PRESETS:
        scenario = PRESETS[name_or_path]
    else:
        path = Path(name_or_path)
        if not path.exists():
            raise BadSpec(
                f"unknown scenario {name_or_path!r}; presets: {sorted(PRESETS)}")
        try:
            scenario = Scenario.from_dict(json.loads(path.read_text("utf-8")))
        except json.JSONDecodeError as exc:
            raise BadSpec(f"scenario file is not valid JSON: {exc}") from exc
    if participants is not None or duration_s is not None:
        scenario = Scenario(
            scenario.name,
            participants if participants is not None else scenario.participants,
            duration_s if duration_s is not None else scenario.duration_s,
            scenario.phases,
        )
    return scenario


def random_scenario(seed: int) -> Scenario:
    """A small randomized scenario for fuzzing the detector stack.

    Durations sometimes land exactly on detector thresholds so boundary
    behavior gets exercised, not just the comfortable middle.
    """
    rng = random.Random(seed)
    participants = rng.randint(2, 6)
    n_phases = rng.randint(2, 6)
    boundary = (175.0, 180.0, 185.0, 295.0, 300.0, 305.0, 120.0, 240.0)
    phases = []
    for _ in range(n_phases):
        kind = rng.choice(PHASE_KINDS)
        if rng.random() < 0.3:
            duration = rng.choice(boundary)
        else:
            duration = rng.uniform(20.0, 360.0)
        phases.append(Phase(kind, duration))
    total = sum(p.duration_s for p in phases)
    return Scenario(f"fuzz-{seed}", participants, total, tuple(phases))


class _Generator:
    def __init__(self, scenario: Scenario, seed: int):
        self.rng = random.Random(seed)
        self.scenario = scenario
        self.state = empty_state()
        self.events: list[SessionEvent] = []
        self.pids = [f"p{i + 1}" for i in range(scenario.participants)]
        self.note_counter = 0
        self.link_counter = 0

    def emit(self, at_ms: float, payload) -> None:
        at = max(int(round(at_ms)), self.state.last_at)
        event = SessionEvent(len(self.events) + 1, at, payload)
        self.state = apply_event(self.state, event)
        self.events.append(event)

    def run(self) -> list[SessionEvent]:
        t = float(START_AT_MS)
        for i, pid in enumerate(self.pids):
            self.emit(t, Join(pid, DISPLAY_NAMES[i]))
            t += self.rng.uniform(500, 4000)
        t0 = self.events[0].at
        end = t0 + self.scenario.duration_s * 1000.0
        cursor = t
        phase_idx = 0
        while cursor < end:
            phase = self.scenario.phases[phase_idx % len(self.scenario.phases)]
            phase_idx += 1
            phase_end = min(cursor + phase.duration_s * 1000.0, end)
            self.run_phase(phase.kind, cursor, phase_end)
            cursor = phase_end
        return self.events

    def run_phase(self, kind: str, start: float, end: float) -> None:
        if kind == "silent":
            return
        actors = list(self.pids)
        if kind == "quiet":
            actors.remove(self.rng.choice(actors))
        if kind == "frustrated":
            frustrated_at = start + self.rng.uniform(5_000, 30_000)
            frustrated_by = self.rng.choice(actors)
        else:
            frustrated_at = None

        def mean_gap(t: float) -> float:
            if kind == "decline":
                # healthy first window, then the bottom falls out
                burst_end = start + 130_000
                return 9_000 if t < burst_end else 200_000
            return 10_000 if kind != "stall" else 12_000

        t = start
        while True:
            t += self.rng.expovariate(1.0 / mean_gap(t))
            if frustrated_at is not None and frustrated_at < min(t, end):
                self.emit(frustrated_at, Chat(frustrated_by, self.rng.choice(FRUSTRATED_LINES)))
                frustrated_at = None
            if t >= end:
                break
            self.act(t, self.rng.choice(actors), whiteboard=kind != "stall")

    def act(self, t: float, pid: str, whiteboard: bool) -> None:
        roll = self.rng.random()
        notes = list(self.state.notes)
        links = list(self.state.links)
        if not whiteboard or roll < 0.55:
            if self.rng.random() < 0.06:
                body = self.rng.choice(BOSS_MENTIONS)
            else:
                body = self.rng.choice(SAFE_CHAT)
            self.emit(t, Chat(pid, body))
        elif roll < 0.73 or not notes:
            self.note_counter += 1
            self.emit(t, NoteCreate(
                f"n{self.note_counter}", pid, NoteKind.TEXT,
                self.rng.choice(NOTE_TEXTS), self.random_position()))
        elif roll < 0.85:
            self.emit(t, NoteUpdate(
                self.rng.choice(notes), pid, content=self.rng.choice(NOTE_TEXTS)))
        elif roll < 0.90:
            self.emit(t, NoteUpdate(
                self.rng.choice(notes), pid, position=self.random_position()))
        elif roll < 0.96 and len(notes) >= 2:
            self.link_counter += 1
            src, dst = self.rng.sample(notes, 2)
            self.emit(t, LinkCreate(f"l{self.link_counter}", src, dst, pid))
        elif roll < 0.98 and links:
            self.emit(t, LinkDelete(self.rng.choice(links), pid))
        elif len(notes) >= 2:
            self.emit(t, NoteDelete(self.rng.choice(notes), pid))
        else:
            self.emit(t, Chat(pid, self.rng.choice(SAFE_CHAT)))

    def random_position(self) -> Position:
        return Position(
            round(self.rng.uniform(0, 1600), 1), round(self.rng.uniform(0, 900), 1))


def generate(scenario: Scenario, seed: int) -> list[SessionEvent]:
    """Build a complete, valid event log for the scenario."""
    return _Generator(scenario, seed).run()
