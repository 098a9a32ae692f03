"""Session hub: command validation, event sequencing, fan-out, agents.

One Gateway owns many sessions. Within a session every admission runs under
one lock: append to the log, fold into state, queue the frame on every
connection, feed the lightbulb engine, and admit whatever the engine fired,
all before the lock is released. That single ordering point is what makes
the gap-free seq and the shared total order trivial to reason about.

Agent replies are the exception: provider calls can block, so boss-mention
requests go to a per-session FIFO worker thread and re-enter through the
same admission path when done. Connections never block admission either; a
full outbound queue disconnects that client only.

Transport lives elsewhere (server.py): this class speaks plain dicts and
can be driven directly from tests.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .agents import (
    AgentRequest, Orchestrator, OrchestratorConfig, build_snapshot, load_profiles,
)
from .config import Mode, SessionConfig
from .eventlog import EventLogWriter, encode_event, log_path
from .lexicon import default_matcher
from .model import (
    Chat, ChatEntry, EventError, Join, LightbulbAck, LinkCreate, LinkDelete,
    NoteCreate, NoteDelete, NoteKind, NoteUpdate, Position, SelfLink,
    SessionEvent, SessionState, UnknownReference, ValidationFailed, apply_event,
    empty_state,
)
from .provider import Provider, provider_from_env
from .triggers import LightbulbEngine, Metrics, intervene, load_intervention_templates

log = logging.getLogger(__name__)

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]{0,63}$")
_STOP = object()


class GatewayError(Exception):
    """Raised for caller mistakes that are not per-command rejections."""


class DuplicateSessionId(GatewayError):
    pass


class UnknownSession(GatewayError):
    pass


class BadSessionConfig(GatewayError):
    pass


class Clock:
    def now_ms(self) -> int:
        raise NotImplementedError


class RealClock(Clock):
    def now_ms(self) -> int:
        return int(time.time() * 1000)


class ManualClock(Clock):
    """Hand-cranked clock so tests control every timestamp."""

    def __init__(self, start_ms: int = 1_000_000_000_000):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: float) -> int:
        self._now += int(ms)
        return self._now

    def set(self, now_ms: int) -> None:
        if now_ms < self._now:
            raise ValueError("clock cannot move backwards")
        self._now = now_ms


class Connection:
    """One client's outbound frame queue; never blocks the session."""

    def __init__(self, session_id: str, max_frames: int = 512):
        self.session_id = session_id
        self.participant_id: str | None = None
        self.alive = True
        self._frames: queue.Queue = queue.Queue(maxsize=max_frames)

    def deliver(self, frame: dict) -> bool:
        if not self.alive:
            return False
        try:
            self._frames.put_nowait(frame)
            return True
        except queue.Full:
            self.alive = False
            return False

    def next_frame(self, timeout: float | None = None) -> dict | None:
        """Pop the next frame; None on timeout or once closed and drained."""
        if not self.alive and self._frames.empty():
            return None
        try:
            frame = self._frames.get(timeout=timeout)
        except queue.Empty:
            return None
        return None if frame is _STOP else frame

    def close(self) -> None:
        self.alive = False
        try:
            self._frames.put_nowait(_STOP)
        except queue.Full:
            pass


def _accept(seq: int, **extra) -> dict:
    return {"ok": True, "seq": seq, **extra}


def _reject(code: str, message: str) -> dict:
    return {"ok": False, "code": code, "message": message}


def state_summary(state: SessionState, chat_tail: int = 50) -> dict:
    """JSON-safe projection of SessionState for Snapshot frames."""
    return {
        "last_seq": state.last_seq,
        "started_at": state.started_at,
        "participants": {
            pid: {"display_name": p.display_name, "joined_at": p.joined_at}
            for pid, p in state.participants.items()
        },
        "notes": {
            nid: {
                "author": n.author, "kind": n.kind.value, "content": n.content,
                "position": {"x": n.position.x, "y": n.position.y},
                "created_at": n.created_at, "updated_at": n.updated_at,
            }
            for nid, n in state.notes.items()
        },
        "links": {
            lid: {"from": l.from_note, "to": l.to_note, "author": l.author}
            for lid, l in state.links.items()
        },
        "chat": [
            {"seq": c.seq, "at": c.at, "author": c.author, "body": c.body,
             "agent": c.agent, "intent": c.intent}
            for c in state.chat[-chat_tail:]
        ],
        "lightbulb": {
            "flashing": state.lightbulb_flashing,
            "pending": [
                {"seq": n.seq, "at": n.at, "kind": n.kind.value,
                 "target": n.target, "message": n.message}
                for n in state.pending_nudges
            ],
        },
        "event_counts": dict(state.event_counts),
    }


class _Session:
    def __init__(self, config: SessionConfig, writer: EventLogWriter,
                 engine: LightbulbEngine | None, created_ms: int):
        self.config = config
        self.writer = writer
        self.engine = engine
        self.created_ms = created_ms
        self.lock = threading.Lock()
        self.state = empty_state()
        self.connections: list[Connection] = []
        self.requests: queue.Queue = queue.Queue()
        self.worker: threading.Thread | None = None
        self.closed = False
        self.note_counter = 0
        self.link_counter = 0
        self.user_counter = 0
        self.agent_requests = 0
        self.agent_replies = 0

    def mint(self, prefix: str, counter_attr: str, taken) -> str:
        n = getattr(self, counter_attr)
        while True:
            n += 1
            candidate = f"{prefix}{n}"
            if candidate not in taken:
                setattr(self, counter_attr, n)
                return candidate


class Gateway:
    def __init__(self, data_dir: str | Path, provider: Provider | None = None,
                 clock: Clock | None = None, config_dir: str | Path | None = None,
                 durable: bool = True, elaborate_nudges: bool = False):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock if clock is not None else RealClock()
        self.provider = provider if provider is not None else provider_from_env()
        self.durable = durable
        self.elaborate_nudges = elaborate_nudges
        self.templates = load_intervention_templates(config_dir)
        self.orchestrator = Orchestrator(
            self.provider, load_profiles(config_dir), default_matcher(),
            OrchestratorConfig())
        self._sessions: dict[str, _Session] = {}
        self._registry_lock = threading.Lock()

    # -- administration ----------------------------------------------------

    def create_session(self, config: SessionConfig) -> str:
        if not _SESSION_ID_RE.match(config.session_id):
            raise BadSessionConfig(
                f"session id {config.session_id!r} must be 1-64 chars of [A-Za-z0-9_-]")
        with self._registry_lock:
            if config.session_id in self._sessions:
                raise DuplicateSessionId(config.session_id)
            writer = EventLogWriter(
                log_path(self.data_dir, config.session_id), durable=self.durable)
            engine = (LightbulbEngine(config.trigger_params)
                      if config.mode is Mode.ORCHESTRATED else None)
            sess = _Session(config, writer, engine, self.clock.now_ms())
            for event in writer.existing_events:
                sess.state = apply_event(sess.state, event)
                if engine is not None:
                    engine.observe(event)  # warm caches; past firings already logged
            self._sessions[config.session_id] = sess
        sess.worker = threading.Thread(
            target=self._agent_worker, args=(sess,),
            name=f"agents-{config.session_id}", daemon=True)
        sess.worker.start()
        log.info("session %s created (mode=%s, limit=%d)",
                 config.session_id, config.mode.value, config.group_size_limit)
        return config.session_id

    def close_session(self, session_id: str) -> dict:
        """Stop the session, drain its agent queue, and dump metrics JSON."""
        sess = self._get(session_id)
        with sess.lock:
            if sess.closed:
                raise UnknownSession(session_id)
            sess.closed = True
        sess.requests.put(_STOP)
        if sess.worker is not None:
            sess.worker.join(timeout=30)
        with sess.lock:
            for conn in sess.connections:
                conn.close()
            sess.connections.clear()
            metrics = self._metrics(sess)
            sess.writer.close()
        path = self.data_dir / f"{session_id}.metrics.json"
        path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", "utf-8")
        with self._registry_lock:
            del self._sessions[session_id]
        log.info("session %s closed; metrics at %s", session_id, path)
        return metrics

    def close(self) -> None:
        for session_id in self.session_ids():
            try:
                self.close_session(session_id)
            except UnknownSession:
                pass

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._sessions)

    def describe(self, session_id: str) -> dict:
        sess = self._get(session_id)
        with sess.lock:
            return {
                "session_id": session_id,
                "mode": sess.config.mode.value,
                "group_size_limit": sess.config.group_size_limit,
                "participants": len(sess.state.participants),
                "last_seq": sess.state.last_seq,
                "connections": len(sess.connections),
            }

    def transcript_path(self, session_id: str) -> Path:
        self._get(session_id)
        return log_path(self.data_dir, session_id)

    def session_state(self, session_id: str) -> SessionState:
        sess = self._get(session_id)
        with sess.lock:
            return sess.state

    def _metrics(self, sess: _Session) -> dict:
        trigger = sess.engine.metrics if sess.engine is not None else Metrics()
        return {
            "session_id": sess.config.session_id,
            "mode": sess.config.mode.value,
            "last_seq": sess.state.last_seq,
            "participants": len(sess.state.participants),
            "event_counts": dict(sess.state.event_counts),
            "triggers": trigger.to_dict(),
            "agent_requests": sess.agent_requests,
            "agent_replies": sess.agent_replies,
        }

    def metrics(self, session_id: str) -> dict:
        sess = self._get(session_id)
        with sess.lock:
            return self._metrics(sess)

    def _get(self, session_id: str) -> _Session:
        with self._registry_lock:
            sess = self._sessions.get(session_id)
        if sess is None:
            raise UnknownSession(session_id)
        return sess

    # -- connections ---------------------------------------------------------

    def connect(self, session_id: str, participant_id: str | None = None,
                max_frames: int = 512) -> Connection:
        """Attach a client: Snapshot first, then the live stream, no gap.

        Passing participant_id reattaches an existing member after a drop;
        a fresh client joins via the join command instead.
        """
        sess = self._get(session_id)
        conn = Connection(session_id, max_frames=max_frames)
        with sess.lock:
            if sess.closed:
                raise UnknownSession(session_id)
            if participant_id is not None:
                if participant_id not in sess.state.participants:
                    raise GatewayError(f"unknown participant {participant_id!r}")
                conn.participant_id = participant_id
            conn.deliver(self._snapshot_frame(sess, conn))
            sess.connections.append(conn)
        return conn

    def disconnect(self, conn: Connection) -> None:
        try:
            sess = self._get(conn.session_id)
        except UnknownSession:
            conn.close()
            return
        with sess.lock:
            if conn in sess.connections:
                sess.connections.remove(conn)
        conn.close()

    def _snapshot_frame(self, sess: _Session, conn: Connection) -> dict:
        return {
            "frame": "snapshot",
            "participant_id": conn.participant_id,
            "last_seq": sess.state.last_seq,
            "mode": sess.config.mode.value,
            "task_prompt": sess.config.task_prompt,
            "state": state_summary(sess.state),
        }

    # -- commands ------------------------------------------------------------

    def handle_command(self, session_id: str, conn: Connection,
                       cmd_type: str, data: dict | None = None) -> dict:
        """Validate and admit one client command.

        Returns an accepted/rejected dict; rejections are also delivered to
        the connection as Rejection frames so transports stay single-writer.
        """
        data = data or {}
        try:
            sess = self._get(session_id)
        except UnknownSession:
            result = _reject("unknown_session", f"no session {session_id!r}")
            conn.deliver({"frame": "rejection", "command": cmd_type, **_strip(result)})
            return result
        with sess.lock:
            result = self._command_locked(sess, conn, cmd_type, data)
        if not result["ok"]:
            conn.deliver({"frame": "rejection", "command": cmd_type, **_strip(result)})
        return result

    def _command_locked(self, sess: _Session, conn: Connection,
                        cmd_type: str, data: dict) -> dict:
        if sess.closed:
            return _reject("unknown_session", "session is closed")
        now = self.clock.now_ms()

        if cmd_type == "join":
            return self._join_locked(sess, conn, data, now)

        pid = conn.participant_id
        if pid is None or pid not in sess.state.participants:
            return _reject("not_joined", "join the session before sending commands")

        try:
            payload, extra = self._build_payload(sess, pid, cmd_type, data)
        except KeyError as exc:
            return _reject("bad_command", f"missing field {exc.args[0]!r}")
        except (TypeError, ValueError) as exc:
            return _reject("bad_command", str(exc))
        if payload is None:
            return _reject("bad_command", f"unknown command {cmd_type!r}")

        if isinstance(payload, LightbulbAck) and not sess.state.lightbulb_flashing:
            # Client raced a clear; harmless, but don't record a no-op event.
            log.info("session %s: ack while idle from %s",
                     sess.config.session_id, pid)
            return _reject("ack_while_idle", "lightbulb is not flashing")

        try:
            event = self._admit_locked(sess, payload, now)
        except UnknownReference as exc:
            return _reject("unknown_reference", str(exc))
        except (SelfLink, ValidationFailed) as exc:
            return _reject("validation_failed", str(exc))
        except EventError as exc:
            return _reject("validation_failed", str(exc))

        if isinstance(payload, Chat) and "boss" in payload.mentions:
            entry = ChatEntry(event.seq, event.at, pid, payload.body,
                              tuple(payload.mentions))
            sess.requests.put(AgentRequest(pid, entry, event.seq))
            sess.agent_requests += 1
        return _accept(event.seq, **extra)

    def _join_locked(self, sess: _Session, conn: Connection,
                     data: dict, now: int) -> dict:
        if conn.participant_id is not None:
            return _reject("validation_failed", "this connection already joined")
        display_name = data.get("display_name")
        if not isinstance(display_name, str) or not display_name.strip():
            return _reject("bad_command", "display_name must be a non-empty string")
        if len(sess.state.participants) >= sess.config.group_size_limit:
            return _reject(
                "session_full",
                f"group is limited to {sess.config.group_size_limit} members")
        pid = sess.mint("u", "user_counter", sess.state.participants)
        try:
            event = self._admit_locked(sess, Join(pid, display_name.strip()), now)
        except EventError as exc:
            return _reject("validation_failed", str(exc))
        conn.participant_id = pid
        # A personal snapshot tells the client who it is; it follows the
        # join broadcast in the queue and carries the same last_seq.
        conn.deliver(self._snapshot_frame(sess, conn))
        return _accept(event.seq, participant_id=pid)

    def _build_payload(self, sess: _Session, pid: str, cmd_type: str, data: dict):
        """Turn wire data into an event payload; server mints whiteboard ids."""
        if cmd_type == "chat":
            return Chat(pid, _req_str(data, "body")), {}
        if cmd_type == "note_create":
            note_id = sess.mint("n", "note_counter", sess.state.notes)
            payload = NoteCreate(
                note_id, pid, NoteKind(_req_str(data, "kind")),
                _req_str(data, "content"), _position(data["position"]))
            return payload, {"note_id": note_id}
        if cmd_type == "note_update":
            content = data.get("content")
            position = _position(data["position"]) if data.get("position") else None
            return NoteUpdate(_req_str(data, "note_id"), pid,
                              content=content, position=position), {}
        if cmd_type == "note_delete":
            return NoteDelete(_req_str(data, "note_id"), pid), {}
        if cmd_type == "link_create":
            link_id = sess.mint("l", "link_counter", sess.state.links)
            payload = LinkCreate(link_id, _req_str(data, "from"),
                                 _req_str(data, "to"), pid)
            return payload, {"link_id": link_id}
        if cmd_type == "link_delete":
            return LinkDelete(_req_str(data, "link_id"), pid), {}
        if cmd_type == "lightbulb_ack":
            return LightbulbAck(pid), {}
        return None, {}

    # -- admission (lock held) ----------------------------------------------

    def _admit_locked(self, sess: _Session, payload, now_ms: int) -> SessionEvent:
        at = max(int(now_ms), sess.state.last_at)
        event = SessionEvent(sess.state.last_seq + 1, at, payload)
        new_state = apply_event(sess.state, event)  # validates before any I/O
        sess.writer.append(event)
        sess.state = new_state
        self._fanout(sess, event)
        if sess.engine is not None:
            for firing in sess.engine.observe(event):
                self._admit_firing_locked(sess, firing)
        return event

    def _admit_firing_locked(self, sess: _Session, firing) -> None:
        provider = self.provider if self.elaborate_nudges else None
        payload = intervene(firing, sess.state, self.templates, provider=provider)
        try:
            self._admit_locked(sess, payload, firing.at)
        except EventError:
            log.exception("session %s: trigger event rejected",
                          sess.config.session_id)

    def _fanout(self, sess: _Session, event: SessionEvent) -> None:
        frame = {"frame": "event", "event": json.loads(encode_event(event))}
        dead = [c for c in sess.connections if not c.deliver(frame)]
        for conn in dead:
            sess.connections.remove(conn)
            conn.close()
            log.warning("session %s: dropped slow consumer %s",
                        sess.config.session_id, conn.participant_id)

    # -- timers ----------------------------------------------------------------

    def tick(self, session_id: str | None = None, now_ms: int | None = None) -> int:
        """Run time-based detectors; returns how many nudges were admitted."""
        now = now_ms if now_ms is not None else self.clock.now_ms()
        ids = [session_id] if session_id is not None else self.session_ids()
        fired = 0
        for sid in ids:
            try:
                sess = self._get(sid)
            except UnknownSession:
                continue
            with sess.lock:
                if sess.closed or sess.engine is None:
                    continue
                for firing in sess.engine.tick(now):
                    self._admit_firing_locked(sess, firing)
                    fired += 1
        return fired

    # -- agent worker ---------------------------------------------------------

    def _agent_worker(self, sess: _Session) -> None:
        while True:
            request = sess.requests.get()
            try:
                if request is _STOP:
                    return
                self._serve_request(sess, request)
            except Exception:
                log.exception("session %s: agent request failed",
                              sess.config.session_id)
            finally:
                sess.requests.task_done()

    def _serve_request(self, sess: _Session, request: AgentRequest) -> None:
        with sess.lock:
            if sess.closed:
                return
            ctx = build_snapshot(
                sess.state, sess.config.task_prompt, self.clock.now_ms(),
                chat_window=self.orchestrator.config.chat_window)
        reply = self.orchestrator.handle_request(request, ctx, sess.config.mode)
        with sess.lock:
            if sess.closed:
                return
            try:
                self._admit_locked(sess, reply, self.clock.now_ms())
                sess.agent_replies += 1
            except EventError:
                log.exception("session %s: reply rejected", sess.config.session_id)

    def drain_agents(self, session_id: str) -> None:
        """Block until every queued boss-mention has produced its reply."""
        self._get(session_id).requests.join()


def _strip(result: dict) -> dict:
    return {k: v for k, v in result.items() if k != "ok"}


def _req_str(data: dict, key: str) -> str:
    value = data[key]
    if not isinstance(value, str):
        raise ValueError(f"{key} must be a string")
    return value


def _position(raw) -> Position:
    if not isinstance(raw, dict):
        raise ValueError("position must be an object with x and y")
    return Position(float(raw["x"]), float(raw["y"]))
