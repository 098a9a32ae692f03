"""Pure session domain model.

A session is an append-only log of SessionEvents; every piece of live state
(participants, chat transcript, whiteboard graph, lightbulb pending prompts)
is derived by folding that log. apply_event is a pure function: it never
mutates its input and two folds of the same log produce equal states, which
is what makes replay, the trigger oracle, and the client-side mirror honest.

Timestamps are milliseconds since epoch, server-assigned, non-decreasing in
seq order. seq is gap-free from 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union


class EventError(Exception):
    """Base for event admission failures; carries the offending seq."""

    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq


class SequenceGap(EventError):
    """Event seq is not exactly last_seq + 1."""


class UnknownReference(EventError):
    """Payload names a participant, note, or link that does not exist."""


class SelfLink(EventError):
    """Link endpoints are the same note."""


class ValidationFailed(EventError):
    """Payload violates a field invariant (empty body, duplicate id, ...)."""


class NoteKind(str, Enum):
    TEXT = "text"
    IMAGE = "image"
    VIDEO = "video"


class TriggerKind(str, Enum):
    INACTIVITY = "inactivity"
    FRUSTRATION = "frustration"
    PARTICIPATION_DECLINE = "participation_decline"
    PROGRESS_STALL = "progress_stall"


# Mention syntax: '@boss', case-insensitive, word-bounded. Students address
# only the boss; the list form leaves room for more addressable agents.
_MENTION_RE = re.compile(r"(?<!\w)@(boss)\b", re.IGNORECASE)


def parse_mentions(body: str) -> list[str]:
    """Return distinct lowercased agent names mentioned in a chat body."""
    seen: list[str] = []
    for match in _MENTION_RE.finditer(body):
        name = match.group(1).lower()
        if name not in seen:
            seen.append(name)
    return seen


@dataclass(frozen=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True)
class Participant:
    participant_id: str
    display_name: str
    joined_at: int


@dataclass(frozen=True)
class Note:
    note_id: str
    author: str
    kind: NoteKind
    content: str  # text body for TEXT, opaque resource reference otherwise
    position: Position
    created_at: int
    updated_at: int


@dataclass(frozen=True)
class NoteLink:
    link_id: str
    from_note: str
    to_note: str
    author: str


@dataclass(frozen=True)
class Evidence:
    """Seq range plus the statistic that crossed its threshold."""

    seq_from: int
    seq_to: int
    stat_name: str
    stat_value: float


# --- event payloads (tagged union) ---------------------------------------

@dataclass(frozen=True)
class Join:
    participant_id: str
    display_name: str


@dataclass(frozen=True)
class Chat:
    author: str
    body: str

    @property
    def mentions(self) -> list[str]:
        return parse_mentions(self.body)


@dataclass(frozen=True)
class NoteCreate:
    note_id: str
    author: str
    kind: NoteKind
    content: str
    position: Position


@dataclass(frozen=True)
class NoteUpdate:
    note_id: str
    author: str
    content: str | None = None     # None = keep current
    position: Position | None = None


@dataclass(frozen=True)
class NoteDelete:
    note_id: str
    author: str


@dataclass(frozen=True)
class LinkCreate:
    link_id: str
    from_note: str
    to_note: str
    author: str


@dataclass(frozen=True)
class LinkDelete:
    link_id: str
    author: str


@dataclass(frozen=True)
class AgentReply:
    agent_id: str
    body: str
    intent: str | None = None      # routing label; None in generic mode
    request_seq: int | None = None  # seq of the mention that prompted this reply


@dataclass(frozen=True)
class TriggerFired:
    kind: TriggerKind
    target: str | None             # participant_id, or None for the whole group
    message: str
    evidence: Evidence


@dataclass(frozen=True)
class LightbulbAck:
    participant_id: str


Payload = Union[
    Join, Chat, NoteCreate, NoteUpdate, NoteDelete,
    LinkCreate, LinkDelete, AgentReply, TriggerFired, LightbulbAck,
]

PAYLOAD_TYPES: dict[str, type] = {
    "join": Join,
    "chat": Chat,
    "note_create": NoteCreate,
    "note_update": NoteUpdate,
    "note_delete": NoteDelete,
    "link_create": LinkCreate,
    "link_delete": LinkDelete,
    "agent_reply": AgentReply,
    "trigger_fired": TriggerFired,
    "lightbulb_ack": LightbulbAck,
}
TYPE_NAMES: dict[type, str] = {cls: name for name, cls in PAYLOAD_TYPES.items()}

# Events counted as participant activity (the raw material for the trigger
# detectors); agent-authored events are excluded.
PARTICIPANT_EVENT_TYPES = frozenset({
    "join", "chat", "note_create", "note_update", "note_delete",
    "link_create", "link_delete", "lightbulb_ack",
})

WHITEBOARD_EVENT_TYPES = frozenset({
    "note_create", "note_update", "note_delete", "link_create", "link_delete",
})


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    at: int
    payload: Payload

    @property
    def type(self) -> str:
        return TYPE_NAMES[type(self.payload)]


def event_author(event: SessionEvent) -> str | None:
    """The participant a given event is attributable to (None for agent events)."""
    p = event.payload
    if isinstance(p, Join):
        return p.participant_id
    if isinstance(p, (Chat, NoteCreate, NoteUpdate, NoteDelete, LinkCreate, LinkDelete)):
        return p.author
    if isinstance(p, LightbulbAck):
        return p.participant_id
    return None


def is_participant_event(event: SessionEvent) -> bool:
    return event.type in PARTICIPANT_EVENT_TYPES


def is_whiteboard_event(event: SessionEvent) -> bool:
    return event.type in WHITEBOARD_EVENT_TYPES


# --- derived state --------------------------------------------------------

@dataclass(frozen=True)
class ChatEntry:
    """One chatroom line: a student message or an agent reply."""

    seq: int
    at: int
    author: str
    body: str
    mentions: tuple[str, ...] = ()
    agent: bool = False
    intent: str | None = None


@dataclass(frozen=True)
class PendingNudge:
    """An unacknowledged lightbulb prompt."""

    seq: int
    at: int
    kind: TriggerKind
    target: str | None
    message: str


@dataclass(frozen=True)
class WhiteboardState:
    notes: dict[str, Note]
    links: dict[str, NoteLink]


@dataclass(frozen=True)
class SessionState:
    """Fold of a session's event log.

    Treat every field as immutable: updates go through apply_event, which
    copies the containers it changes.
    """

    last_seq: int = 0
    last_at: int = 0
    started_at: int | None = None
    participants: dict[str, Participant] = field(default_factory=dict)
    chat: tuple[ChatEntry, ...] = ()
    notes: dict[str, Note] = field(default_factory=dict)
    links: dict[str, NoteLink] = field(default_factory=dict)
    event_counts: dict[str, int] = field(default_factory=dict)
    pending_nudges: tuple[PendingNudge, ...] = ()

    @property
    def whiteboard(self) -> WhiteboardState:
        return WhiteboardState(self.notes, self.links)

    @property
    def lightbulb_flashing(self) -> bool:
        return bool(self.pending_nudges)


def empty_state() -> SessionState:
    return SessionState()


def _bump_count(counts: dict[str, int], author: str) -> dict[str, int]:
    new = dict(counts)
    new[author] = new.get(author, 0) + 1
    return new


def _require_participant(state: SessionState, pid: str, seq: int) -> None:
    if pid not in state.participants:
        raise UnknownReference(f"unknown participant {pid!r}", seq)


def apply_event(state: SessionState, event: SessionEvent) -> SessionState:
    """Fold one event into the state; pure, raises EventError on invalid input."""
    seq = event.seq
    if seq != state.last_seq + 1:
        raise SequenceGap(f"expected seq {state.last_seq + 1}, got {seq}", seq)
    if event.at < state.last_at:
        raise ValidationFailed(
            f"timestamp went backwards ({event.at} < {state.last_at})", seq)

    p = event.payload
    changes: dict = {}

    if isinstance(p, Join):
        if not p.participant_id:
            raise ValidationFailed("participant_id must be non-empty", seq)
        if not p.display_name.strip():
            raise ValidationFailed("display_name must be non-empty", seq)
        if p.participant_id in state.participants:
            raise ValidationFailed(f"participant {p.participant_id!r} already joined", seq)
        joined = dict(state.participants)
        joined[p.participant_id] = Participant(p.participant_id, p.display_name, event.at)
        changes["participants"] = joined
        changes["event_counts"] = _bump_count(state.event_counts, p.participant_id)

    elif isinstance(p, Chat):
        _require_participant(state, p.author, seq)
        if not p.body.strip():
            raise ValidationFailed("chat body must be non-empty", seq)
        entry = ChatEntry(seq, event.at, p.author, p.body, tuple(p.mentions))
        changes["chat"] = state.chat + (entry,)
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, NoteCreate):
        _require_participant(state, p.author, seq)
        if not p.note_id:
            raise ValidationFailed("note_id must be non-empty", seq)
        if p.note_id in state.notes:
            raise ValidationFailed(f"note {p.note_id!r} already exists", seq)
        notes = dict(state.notes)
        notes[p.note_id] = Note(
            p.note_id, p.author, NoteKind(p.kind), p.content, p.position,
            created_at=event.at, updated_at=event.at)
        changes["notes"] = notes
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, NoteUpdate):
        _require_participant(state, p.author, seq)
        if p.note_id not in state.notes:
            raise UnknownReference(f"unknown note {p.note_id!r}", seq)
        old = state.notes[p.note_id]
        notes = dict(state.notes)
        notes[p.note_id] = replace(
            old,
            content=old.content if p.content is None else p.content,
            position=old.position if p.position is None else p.position,
            updated_at=event.at)
        changes["notes"] = notes
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, NoteDelete):
        _require_participant(state, p.author, seq)
        if p.note_id not in state.notes:
            raise UnknownReference(f"unknown note {p.note_id!r}", seq)
        notes = dict(state.notes)
        del notes[p.note_id]
        # deleting a note cascades every incident link
        links = {lid: ln for lid, ln in state.links.items()
                 if ln.from_note != p.note_id and ln.to_note != p.note_id}
        changes["notes"] = notes
        changes["links"] = links
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, LinkCreate):
        _require_participant(state, p.author, seq)
        if not p.link_id:
            raise ValidationFailed("link_id must be non-empty", seq)
        if p.link_id in state.links:
            raise ValidationFailed(f"link {p.link_id!r} already exists", seq)
        if p.from_note == p.to_note:
            raise SelfLink(f"note {p.from_note!r} cannot link to itself", seq)
        for nid in (p.from_note, p.to_note):
            if nid not in state.notes:
                raise UnknownReference(f"unknown note {nid!r}", seq)
        links = dict(state.links)
        links[p.link_id] = NoteLink(p.link_id, p.from_note, p.to_note, p.author)
        changes["links"] = links
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, LinkDelete):
        _require_participant(state, p.author, seq)
        if p.link_id not in state.links:
            raise UnknownReference(f"unknown link {p.link_id!r}", seq)
        links = dict(state.links)
        del links[p.link_id]
        changes["links"] = links
        changes["event_counts"] = _bump_count(state.event_counts, p.author)

    elif isinstance(p, AgentReply):
        if not p.agent_id:
            raise ValidationFailed("agent_id must be non-empty", seq)
        if not p.body.strip():
            raise ValidationFailed("agent reply body must be non-empty", seq)
        entry = ChatEntry(seq, event.at, p.agent_id, p.body, agent=True, intent=p.intent)
        changes["chat"] = state.chat + (entry,)

    elif isinstance(p, TriggerFired):
        kind = TriggerKind(p.kind)
        if p.target is not None:
            _require_participant(state, p.target, seq)
        ev = p.evidence
        if not (1 <= ev.seq_from <= ev.seq_to <= seq):
            raise ValidationFailed(
                f"evidence range [{ev.seq_from}, {ev.seq_to}] invalid at seq {seq}", seq)
        nudge = PendingNudge(seq, event.at, kind, p.target, p.message)
        changes["pending_nudges"] = state.pending_nudges + (nudge,)

    elif isinstance(p, LightbulbAck):
        _require_participant(state, p.participant_id, seq)
        # ack while idle is an idempotent no-op; clearing () stays ()
        changes["pending_nudges"] = ()
        changes["event_counts"] = _bump_count(state.event_counts, p.participant_id)

    else:  # pragma: no cover - union is closed
        raise ValidationFailed(f"unknown payload {type(p).__name__}", seq)

    changes["last_seq"] = seq
    changes["last_at"] = event.at
    if state.started_at is None:
        changes["started_at"] = event.at
    return replace(state, **changes)


def fold(events: list[SessionEvent] | tuple[SessionEvent, ...]) -> SessionState:
    """Fold an ordered, gap-free-from-1 event list into a SessionState."""
    state = empty_state()
    for event in events:
        state = apply_event(state, event)
    return state
