"""Durable append-only event log.

One UTF-8 JSON record per line, LF endings, fixed field names
(seq, at, type, data), one file per session named <session_id>.events.jsonl.
The file is the contract between the live server, the replay CLI, and the
trigger oracle: transcripts double as research data and as test fixtures.

A torn final line (interrupted append, no trailing LF and not decodable) is
discarded with a warning on replay and truncated away when a writer reopens
the file; any earlier malformed line is corruption and fails loudly.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from .model import (
    AgentReply, Chat, Evidence, Join, LightbulbAck, LinkCreate, LinkDelete,
    NoteCreate, NoteDelete, NoteKind, NoteUpdate, Payload, Position,
    SequenceGap, SessionEvent, TriggerFired, TriggerKind, PAYLOAD_TYPES,
)

log = logging.getLogger(__name__)

LOG_SUFFIX = ".events.jsonl"


class CorruptRecord(Exception):
    """A complete log line that cannot be decoded into a SessionEvent."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class StorageFailure(Exception):
    """Underlying I/O failed."""


def _position_to_json(pos: Position) -> dict:
    return {"x": pos.x, "y": pos.y}


def _position_from_json(raw) -> Position:
    if not isinstance(raw, dict) or set(raw) != {"x", "y"}:
        raise ValueError(f"bad position {raw!r}")
    return Position(float(raw["x"]), float(raw["y"]))


def _payload_to_json(payload: Payload) -> dict:
    if isinstance(payload, Join):
        return {"participant_id": payload.participant_id, "display_name": payload.display_name}
    if isinstance(payload, Chat):
        return {"author": payload.author, "body": payload.body}
    if isinstance(payload, NoteCreate):
        return {
            "note_id": payload.note_id, "author": payload.author,
            "kind": payload.kind.value, "content": payload.content,
            "position": _position_to_json(payload.position),
        }
    if isinstance(payload, NoteUpdate):
        return {
            "note_id": payload.note_id, "author": payload.author,
            "content": payload.content,
            "position": None if payload.position is None else _position_to_json(payload.position),
        }
    if isinstance(payload, NoteDelete):
        return {"note_id": payload.note_id, "author": payload.author}
    if isinstance(payload, LinkCreate):
        return {
            "link_id": payload.link_id, "from": payload.from_note,
            "to": payload.to_note, "author": payload.author,
        }
    if isinstance(payload, LinkDelete):
        return {"link_id": payload.link_id, "author": payload.author}
    if isinstance(payload, AgentReply):
        return {
            "agent_id": payload.agent_id, "body": payload.body,
            "intent": payload.intent, "request_seq": payload.request_seq,
        }
    if isinstance(payload, TriggerFired):
        ev = payload.evidence
        return {
            "kind": payload.kind.value, "target": payload.target,
            "message": payload.message,
            "evidence": {
                "seq_from": ev.seq_from, "seq_to": ev.seq_to,
                "stat": {"name": ev.stat_name, "value": ev.stat_value},
            },
        }
    if isinstance(payload, LightbulbAck):
        return {"participant_id": payload.participant_id}
    raise TypeError(f"unknown payload {type(payload).__name__}")


def _require(data: dict, key: str, types) -> object:
    if key not in data:
        raise ValueError(f"missing field {key!r}")
    value = data[key]
    if not isinstance(value, types):
        raise ValueError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def _optional(data: dict, key: str, types) -> object | None:
    value = data.get(key)
    if value is not None and not isinstance(value, types):
        raise ValueError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def _payload_from_json(type_name: str, data: dict) -> Payload:
    if type_name == "join":
        return Join(str(_require(data, "participant_id", str)),
                    str(_require(data, "display_name", str)))
    if type_name == "chat":
        return Chat(str(_require(data, "author", str)), str(_require(data, "body", str)))
    if type_name == "note_create":
        return NoteCreate(
            str(_require(data, "note_id", str)), str(_require(data, "author", str)),
            NoteKind(_require(data, "kind", str)), str(_require(data, "content", str)),
            _position_from_json(_require(data, "position", dict)))
    if type_name == "note_update":
        position = _optional(data, "position", dict)
        return NoteUpdate(
            str(_require(data, "note_id", str)), str(_require(data, "author", str)),
            content=_optional(data, "content", str),
            position=None if position is None else _position_from_json(position))
    if type_name == "note_delete":
        return NoteDelete(str(_require(data, "note_id", str)), str(_require(data, "author", str)))
    if type_name == "link_create":
        return LinkCreate(
            str(_require(data, "link_id", str)), str(_require(data, "from", str)),
            str(_require(data, "to", str)), str(_require(data, "author", str)))
    if type_name == "link_delete":
        return LinkDelete(str(_require(data, "link_id", str)), str(_require(data, "author", str)))
    if type_name == "agent_reply":
        request_seq = _optional(data, "request_seq", int)
        return AgentReply(
            str(_require(data, "agent_id", str)), str(_require(data, "body", str)),
            intent=_optional(data, "intent", str),
            request_seq=request_seq)
    if type_name == "trigger_fired":
        raw_ev = _require(data, "evidence", dict)
        raw_stat = _require(raw_ev, "stat", dict)
        evidence = Evidence(
            int(_require(raw_ev, "seq_from", int)), int(_require(raw_ev, "seq_to", int)),
            str(_require(raw_stat, "name", str)),
            float(_require(raw_stat, "value", (int, float))))
        return TriggerFired(
            TriggerKind(_require(data, "kind", str)),
            _optional(data, "target", str),
            str(_require(data, "message", str)), evidence)
    if type_name == "lightbulb_ack":
        return LightbulbAck(str(_require(data, "participant_id", str)))
    raise ValueError(f"unknown event type {type_name!r}")


def encode_event(event: SessionEvent) -> str:
    """One event as a single JSON line (no trailing newline)."""
    record = {
        "seq": event.seq,
        "at": event.at,
        "type": event.type,
        "data": _payload_to_json(event.payload),
    }
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def decode_event(line: str) -> SessionEvent:
    """Parse one log line; raises ValueError on any malformation."""
    record = json.loads(line)
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")
    extra = set(record) - {"seq", "at", "type", "data"}
    if extra:
        raise ValueError(f"unexpected fields {sorted(extra)}")
    seq = _require(record, "seq", int)
    at = _require(record, "at", int)
    if isinstance(seq, bool) or isinstance(at, bool):
        raise ValueError("seq/at must be integers")
    type_name = _require(record, "type", str)
    if type_name not in PAYLOAD_TYPES:
        raise ValueError(f"unknown event type {type_name!r}")
    data = _require(record, "data", dict)
    return SessionEvent(int(seq), int(at), _payload_from_json(str(type_name), data))


def log_path(data_dir: str | Path, session_id: str) -> Path:
    return Path(data_dir) / f"{session_id}{LOG_SUFFIX}"


class EventLogWriter:
    """Single-writer append handle for one session's log.

    Records are written line-by-line and optionally fsynced before the
    append is acknowledged (durable=True, the server default). Reopening a
    file resumes at the next seq; a torn final line is truncated away first.
    """

    def __init__(self, path: str | Path, durable: bool = True):
        self.path = Path(path)
        self.durable = durable
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.existing_events = (
                replay_file(self.path, truncate_torn=True) if self.path.exists() else [])
            self.next_seq = (self.existing_events[-1].seq + 1) if self.existing_events else 1
            self._handle = open(self.path, "a", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise StorageFailure(f"cannot open {self.path}: {exc}") from exc

    def append(self, event: SessionEvent) -> int:
        """Durably write one event; returns the acked seq."""
        if event.seq != self.next_seq:
            raise SequenceGap(f"expected seq {self.next_seq}, got {event.seq}", event.seq)
        line = encode_event(event) + "\n"
        try:
            self._handle.write(line)
            self._handle.flush()
            if self.durable:
                os.fsync(self._handle.fileno())
        except OSError as exc:
            raise StorageFailure(f"append to {self.path} failed: {exc}") from exc
        self.next_seq += 1
        return event.seq

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "EventLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def replay_file(path: str | Path, truncate_torn: bool = False) -> list[SessionEvent]:
    """Read a session log back into ordered events.

    A final line without a trailing LF that fails to decode is treated as a
    torn write: discarded with a warning (and physically truncated when
    truncate_torn is set, so a reopened writer appends cleanly). Every other
    malformed line raises CorruptRecord. Seq must be gap-free from 1.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise StorageFailure(f"cannot read {path}: {exc}") from exc

    events: list[SessionEvent] = []
    offset = 0
    line_no = 0
    keep_bytes = 0
    while offset < len(raw):
        line_no += 1
        newline = raw.find(b"\n", offset)
        complete = newline != -1
        end = newline if complete else len(raw)
        line_bytes = raw[offset:end]
        expected = events[-1].seq + 1 if events else 1
        try:
            event = decode_event(line_bytes.decode("utf-8"))
            if event.seq != expected:
                raise ValueError(f"expected seq {expected}, got {event.seq}")
        except (ValueError, UnicodeDecodeError) as exc:
            if not complete:
                log.warning("discarding torn final line %d of %s: %s", line_no, path, exc)
                break
            raise CorruptRecord(str(exc), line_no) from exc
        events.append(event)
        offset = end + 1 if complete else end
        keep_bytes = offset

    if truncate_torn and keep_bytes < len(raw):
        try:
            with open(path, "r+b") as handle:
                handle.truncate(keep_bytes)
        except OSError as exc:
            raise StorageFailure(f"cannot truncate {path}: {exc}") from exc
    return events


def write_log(path: str | Path, events: list[SessionEvent]) -> None:
    """Bulk-write a complete log (synthetic data); one fsync at the end."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for event in events:
                handle.write(encode_event(event) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
    except OSError as exc:
        raise StorageFailure(f"write to {path} failed: {exc}") from exc
