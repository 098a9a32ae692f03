// WebSocket wrapper for one session connection. The constructor takes the
// socket class so tests can pass the `ws` package's implementation; in the
// browser the global WebSocket is used.

import { parseFrame, type CommandFrame, type ServerFrame } from "./protocol.js";

export type SocketHandlers = {
  onFrame?: (frame: ServerFrame) => void;
  onOpen?: () => void;
  onClose?: () => void;
  onError?: (err: unknown) => void;
};

type WebSocketLike = {
  readyState: number;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
};

export type WebSocketCtor = new (url: string) => WebSocketLike;

export function sessionUrl(base: string, sessionId: string, participantId?: string): string {
  const ws = base.replace(/^http/, "ws").replace(/\/$/, "");
  const suffix = participantId ? `?participant_id=${encodeURIComponent(participantId)}` : "";
  return `${ws}/sessions/${encodeURIComponent(sessionId)}/ws${suffix}`;
}

export class RoomSocket {
  private ws?: WebSocketLike;

  constructor(
    private url: string,
    private handlers: SocketHandlers = {},
    private SocketImpl: WebSocketCtor = (globalThis as { WebSocket?: WebSocketCtor })
      .WebSocket as WebSocketCtor
  ) {
    if (!this.SocketImpl) {
      throw new Error("no WebSocket implementation available");
    }
  }

  connect(): void {
    this.ws = new this.SocketImpl(this.url);
    this.ws.onopen = () => this.handlers.onOpen?.();
    this.ws.onclose = () => this.handlers.onClose?.();
    this.ws.onerror = (e) => this.handlers.onError?.(e);
    this.ws.onmessage = (e) => {
      let frame: ServerFrame;
      try {
        frame = parseFrame(String(e.data));
      } catch (err) {
        this.handlers.onError?.(err);
        return;
      }
      this.handlers.onFrame?.(frame);
    };
  }

  get open(): boolean {
    return this.ws?.readyState === 1; // WebSocket.OPEN
  }

  send(cmd: string, data?: Record<string, unknown>): void {
    if (!this.ws || this.ws.readyState !== 1) {
      this.handlers.onError?.(new Error(`socket not open, dropping '${cmd}'`));
      return;
    }
    const frame: CommandFrame = data === undefined ? { cmd } : { cmd, data };
    this.ws.send(JSON.stringify(frame));
  }

  close(): void {
    try {
      this.ws?.close();
    } catch {
      // already closed
    }
    this.ws = undefined;
  }
}

// REST helpers; same origin as the socket.
export async function createSession(
  base: string,
  config: Record<string, unknown> = {}
): Promise<{ session_id: string; mode: string }> {
  const res = await fetch(`${base.replace(/\/$/, "")}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(config),
  });
  if (res.status !== 201) {
    const body = await res.text();
    throw new Error(`create session failed (${res.status}): ${body}`);
  }
  return (await res.json()) as { session_id: string; mode: string };
}
