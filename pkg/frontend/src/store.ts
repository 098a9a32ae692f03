// Client session state: a pure fold over received frames.
//
// This re-specifies the server's fold so the view can be checked against
// Snapshot frames on reconnect. The client never invents state: every field
// below is derived from events, and the lightbulb only changes on
// trigger_fired / lightbulb_ack broadcasts.

import type {
  EventRecord,
  Position,
  ServerFrame,
  SessionMode,
  SnapshotFrame,
  SnapshotState,
  TriggerKindName,
} from "./protocol.js";

export interface ParticipantView {
  displayName: string;
  joinedAt: number;
}

export interface NoteView {
  author: string;
  kind: "text" | "image" | "video";
  content: string;
  position: Position;
  createdAt: number;
  updatedAt: number;
}

export interface LinkView {
  from: string;
  to: string;
  author: string;
}

export interface ChatLine {
  seq: number;
  at: number;
  author: string; // agent_id when agent is true
  body: string;
  agent: boolean;
  intent: string | null;
}

export interface PendingNudge {
  seq: number;
  at: number;
  kind: TriggerKindName;
  target: string | null;
  message: string;
}

export interface SessionView {
  lastSeq: number;
  lastAt: number;
  startedAt: number | null;
  mode: SessionMode;
  taskPrompt: string;
  participantId: string | null; // who this connection is, once joined
  participants: Record<string, ParticipantView>;
  notes: Record<string, NoteView>;
  links: Record<string, LinkView>;
  chat: ChatLine[];
  eventCounts: Record<string, number>;
  pendingNudges: PendingNudge[];
}

export class FoldError extends Error {
  constructor(message: string, readonly seq: number) {
    super(message);
  }
}

export function emptyView(): SessionView {
  return {
    lastSeq: 0,
    lastAt: 0,
    startedAt: null,
    mode: "orchestrated",
    taskPrompt: "",
    participantId: null,
    participants: {},
    notes: {},
    links: {},
    chat: [],
    eventCounts: {},
    pendingNudges: [],
  };
}

export function lightbulbFlashing(view: SessionView): boolean {
  return view.pendingNudges.length > 0;
}

function bump(counts: Record<string, number>, author: string): Record<string, number> {
  return { ...counts, [author]: (counts[author] ?? 0) + 1 };
}

function requireParticipant(view: SessionView, pid: string, seq: number): void {
  if (!(pid in view.participants)) {
    throw new FoldError(`unknown participant '${pid}'`, seq);
  }
}

export function applyEvent(view: SessionView, ev: EventRecord): SessionView {
  if (ev.seq !== view.lastSeq + 1) {
    throw new FoldError(`expected seq ${view.lastSeq + 1}, got ${ev.seq}`, ev.seq);
  }
  if (ev.at < view.lastAt) {
    throw new FoldError(`timestamp went backwards (${ev.at} < ${view.lastAt})`, ev.seq);
  }

  const next: SessionView = {
    ...view,
    lastSeq: ev.seq,
    lastAt: ev.at,
    startedAt: view.startedAt ?? ev.at,
  };

  switch (ev.type) {
    case "join": {
      const { participant_id, display_name } = ev.data;
      if (participant_id in view.participants) {
        throw new FoldError(`participant '${participant_id}' already joined`, ev.seq);
      }
      next.participants = {
        ...view.participants,
        [participant_id]: { displayName: display_name, joinedAt: ev.at },
      };
      next.eventCounts = bump(view.eventCounts, participant_id);
      break;
    }
    case "chat": {
      requireParticipant(view, ev.data.author, ev.seq);
      next.chat = view.chat.concat({
        seq: ev.seq,
        at: ev.at,
        author: ev.data.author,
        body: ev.data.body,
        agent: false,
        intent: null,
      });
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "note_create": {
      requireParticipant(view, ev.data.author, ev.seq);
      if (ev.data.note_id in view.notes) {
        throw new FoldError(`note '${ev.data.note_id}' already exists`, ev.seq);
      }
      next.notes = {
        ...view.notes,
        [ev.data.note_id]: {
          author: ev.data.author,
          kind: ev.data.kind,
          content: ev.data.content,
          position: ev.data.position,
          createdAt: ev.at,
          updatedAt: ev.at,
        },
      };
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "note_update": {
      requireParticipant(view, ev.data.author, ev.seq);
      const old = view.notes[ev.data.note_id];
      if (!old) {
        throw new FoldError(`unknown note '${ev.data.note_id}'`, ev.seq);
      }
      next.notes = {
        ...view.notes,
        [ev.data.note_id]: {
          ...old,
          content: ev.data.content ?? old.content,
          position: ev.data.position ?? old.position,
          updatedAt: ev.at,
        },
      };
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "note_delete": {
      requireParticipant(view, ev.data.author, ev.seq);
      if (!(ev.data.note_id in view.notes)) {
        throw new FoldError(`unknown note '${ev.data.note_id}'`, ev.seq);
      }
      const notes = { ...view.notes };
      delete notes[ev.data.note_id];
      // deleting a note cascades every incident link, same as the server
      const links: Record<string, LinkView> = {};
      for (const [lid, link] of Object.entries(view.links)) {
        if (link.from !== ev.data.note_id && link.to !== ev.data.note_id) {
          links[lid] = link;
        }
      }
      next.notes = notes;
      next.links = links;
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "link_create": {
      requireParticipant(view, ev.data.author, ev.seq);
      if (ev.data.link_id in view.links) {
        throw new FoldError(`link '${ev.data.link_id}' already exists`, ev.seq);
      }
      if (ev.data.from === ev.data.to) {
        throw new FoldError(`note '${ev.data.from}' cannot link to itself`, ev.seq);
      }
      for (const nid of [ev.data.from, ev.data.to]) {
        if (!(nid in view.notes)) {
          throw new FoldError(`unknown note '${nid}'`, ev.seq);
        }
      }
      next.links = {
        ...view.links,
        [ev.data.link_id]: { from: ev.data.from, to: ev.data.to, author: ev.data.author },
      };
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "link_delete": {
      requireParticipant(view, ev.data.author, ev.seq);
      if (!(ev.data.link_id in view.links)) {
        throw new FoldError(`unknown link '${ev.data.link_id}'`, ev.seq);
      }
      const links = { ...view.links };
      delete links[ev.data.link_id];
      next.links = links;
      next.eventCounts = bump(view.eventCounts, ev.data.author);
      break;
    }
    case "agent_reply": {
      next.chat = view.chat.concat({
        seq: ev.seq,
        at: ev.at,
        author: ev.data.agent_id,
        body: ev.data.body,
        agent: true,
        intent: ev.data.intent,
      });
      // agent events never count as participant activity
      break;
    }
    case "trigger_fired": {
      next.pendingNudges = view.pendingNudges.concat({
        seq: ev.seq,
        at: ev.at,
        kind: ev.data.kind,
        target: ev.data.target,
        message: ev.data.message,
      });
      break;
    }
    case "lightbulb_ack": {
      requireParticipant(view, ev.data.participant_id, ev.seq);
      next.pendingNudges = [];
      next.eventCounts = bump(view.eventCounts, ev.data.participant_id);
      break;
    }
  }
  return next;
}

export function applySnapshot(view: SessionView, frame: SnapshotFrame): SessionView {
  const s = frame.state;
  return {
    lastSeq: s.last_seq,
    lastAt: view.lastAt > 0 ? view.lastAt : 0, // snapshots don't carry last_at; events will
    startedAt: s.started_at,
    mode: frame.mode,
    taskPrompt: frame.task_prompt,
    participantId: frame.participant_id ?? view.participantId,
    participants: Object.fromEntries(
      Object.entries(s.participants).map(([pid, p]) => [
        pid,
        { displayName: p.display_name, joinedAt: p.joined_at },
      ])
    ),
    notes: Object.fromEntries(
      Object.entries(s.notes).map(([nid, n]) => [
        nid,
        {
          author: n.author,
          kind: n.kind,
          content: n.content,
          position: n.position,
          createdAt: n.created_at,
          updatedAt: n.updated_at,
        },
      ])
    ),
    links: Object.fromEntries(
      Object.entries(s.links).map(([lid, l]) => [lid, { from: l.from, to: l.to, author: l.author }])
    ),
    chat: s.chat.map((c) => ({
      seq: c.seq,
      at: c.at,
      author: c.author,
      body: c.body,
      agent: c.agent,
      intent: c.intent,
    })),
    eventCounts: { ...s.event_counts },
    pendingNudges: s.lightbulb.pending.map((n) => ({
      seq: n.seq,
      at: n.at,
      kind: n.kind,
      target: n.target,
      message: n.message,
    })),
  };
}

// Frame-order fidelity check: does a locally folded view agree with a
// Snapshot frame from the server? Returns human-readable differences, empty
// when everything matches. Chat is compared on the snapshot's (bounded) tail.
export function snapshotDiff(view: SessionView, s: SnapshotState): string[] {
  const diffs: string[] = [];
  if (view.lastSeq !== s.last_seq) {
    diffs.push(`last_seq: view ${view.lastSeq}, snapshot ${s.last_seq}`);
  }
  if (view.startedAt !== s.started_at) {
    diffs.push(`started_at: view ${view.startedAt}, snapshot ${s.started_at}`);
  }
  const folded = applySnapshot(emptyView(), {
    frame: "snapshot",
    participant_id: null,
    last_seq: s.last_seq,
    mode: view.mode,
    task_prompt: view.taskPrompt,
    state: s,
  });
  for (const field of ["participants", "notes", "links", "eventCounts", "pendingNudges"] as const) {
    const a = JSON.stringify(view[field]);
    const b = JSON.stringify(folded[field]);
    if (a !== b) {
      diffs.push(`${field}: view ${a}, snapshot ${b}`);
    }
  }
  // the server caps snapshot chat at a tail of 50 lines
  const tail = s.chat.length >= 50 ? view.chat.slice(-50) : view.chat;
  if (JSON.stringify(tail) !== JSON.stringify(folded.chat)) {
    diffs.push(`chat tail: view ${JSON.stringify(tail)}, snapshot ${JSON.stringify(folded.chat)}`);
  }
  return diffs;
}

export type StoreListener = (view: SessionView, frame: ServerFrame) => void;

// Serialized frame application plus change notification; the socket calls
// onFrame, widgets subscribe. Rejections don't change the view but are still
// forwarded so the toast area can show them.
export class SessionStore {
  private current = emptyView();
  private listeners: StoreListener[] = [];

  get view(): SessionView {
    return this.current;
  }

  subscribe(listener: StoreListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  onFrame(frame: ServerFrame): void {
    if (frame.frame === "snapshot") {
      this.current = applySnapshot(this.current, frame);
    } else if (frame.frame === "event") {
      this.current = applyEvent(this.current, frame.event);
    }
    for (const listener of [...this.listeners]) {
      listener(this.current, frame);
    }
  }
}
