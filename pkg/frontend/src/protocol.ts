// Wire types for the gateway's JSON protocol. These mirror the server's
// encoding byte for byte; nothing in here is invented client-side.

export type SessionMode = "orchestrated" | "generic";

export type NoteKind = "text" | "image" | "video";

export type TriggerKindName =
  | "inactivity"
  | "frustration"
  | "participation_decline"
  | "progress_stall";

export interface Position {
  x: number;
  y: number;
}

export interface JoinData {
  participant_id: string;
  display_name: string;
}

export interface ChatData {
  author: string;
  body: string;
}

export interface NoteCreateData {
  note_id: string;
  author: string;
  kind: NoteKind;
  content: string;
  position: Position;
}

// null means "keep the current value"; the server always includes both keys.
export interface NoteUpdateData {
  note_id: string;
  author: string;
  content: string | null;
  position: Position | null;
}

export interface NoteDeleteData {
  note_id: string;
  author: string;
}

export interface LinkCreateData {
  link_id: string;
  author: string;
  from: string;
  to: string;
}

export interface LinkDeleteData {
  link_id: string;
  author: string;
}

export interface AgentReplyData {
  agent_id: string;
  body: string;
  intent: string | null; // null in generic mode
  request_seq: number | null; // seq of the mention this answers
}

export interface Evidence {
  seq_from: number;
  seq_to: number;
  stat: { name: string; value: number };
}

export interface TriggerFiredData {
  kind: TriggerKindName;
  target: string | null; // null targets the whole group
  message: string;
  evidence: Evidence;
}

export interface LightbulbAckData {
  participant_id: string;
}

export type EventRecord = { seq: number; at: number } & (
  | { type: "join"; data: JoinData }
  | { type: "chat"; data: ChatData }
  | { type: "note_create"; data: NoteCreateData }
  | { type: "note_update"; data: NoteUpdateData }
  | { type: "note_delete"; data: NoteDeleteData }
  | { type: "link_create"; data: LinkCreateData }
  | { type: "link_delete"; data: LinkDeleteData }
  | { type: "agent_reply"; data: AgentReplyData }
  | { type: "trigger_fired"; data: TriggerFiredData }
  | { type: "lightbulb_ack"; data: LightbulbAckData }
);

// --- frames (server -> client) --------------------------------------------

export interface SnapshotChatLine {
  seq: number;
  at: number;
  author: string; // agent_id when agent is true
  body: string;
  agent: boolean;
  intent: string | null;
}

export interface SnapshotNudge {
  seq: number;
  at: number;
  kind: TriggerKindName;
  target: string | null;
  message: string;
}

export interface SnapshotState {
  last_seq: number;
  started_at: number | null;
  participants: Record<string, { display_name: string; joined_at: number }>;
  notes: Record<
    string,
    {
      author: string;
      kind: NoteKind;
      content: string;
      position: Position;
      created_at: number;
      updated_at: number;
    }
  >;
  links: Record<string, { from: string; to: string; author: string }>;
  chat: SnapshotChatLine[]; // the server sends a bounded tail, not everything
  lightbulb: { flashing: boolean; pending: SnapshotNudge[] };
  event_counts: Record<string, number>;
}

export interface SnapshotFrame {
  frame: "snapshot";
  participant_id: string | null; // null until this connection has joined
  last_seq: number;
  mode: SessionMode;
  task_prompt: string;
  state: SnapshotState;
}

export interface EventFrame {
  frame: "event";
  event: EventRecord;
}

export interface RejectionFrame {
  frame: "rejection";
  command: string | null;
  code: string;
  message: string;
}

export type ServerFrame = SnapshotFrame | EventFrame | RejectionFrame;

// --- commands (client -> server) -------------------------------------------

export interface CommandFrame {
  cmd: string;
  data?: Record<string, unknown>;
}

export function parseFrame(raw: string): ServerFrame {
  const parsed = JSON.parse(raw);
  if (!parsed || typeof parsed !== "object" || typeof parsed.frame !== "string") {
    throw new Error("not a server frame: " + raw.slice(0, 120));
  }
  return parsed as ServerFrame;
}

// The one mention the server routes; anything else stays plain chat.
// Same grammar as the server: '@boss', case-insensitive, word-bounded.
export const BOSS_MENTION = "@boss";

const MENTION_RE = /(?<!\w)@boss\b/i;

export function mentionsBoss(body: string): boolean {
  return MENTION_RE.test(body);
}
