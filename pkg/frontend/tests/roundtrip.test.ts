// @vitest-environment jsdom

// End-to-end pass against a real server process: two clients share a session,
// the board converges after create/link/delete, a forced inactivity nudge
// flashes the bulb until someone views the prompt, and an @boss mention comes
// back as an intent-badged agent reply (mock provider, no network).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";
import { afterAll, afterEach, beforeAll, describe, expect, it } from "vitest";

import { AppShell } from "../src/app.js";
import type { SnapshotFrame } from "../src/protocol.js";
import { RoomSocket, createSession, sessionUrl, type WebSocketCtor } from "../src/socket.js";
import { lightbulbFlashing, snapshotDiff, type SessionView } from "../src/store.js";

const WS = WebSocket as unknown as WebSocketCtor;
const PORT = 12000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;

// detectors that stay out of the way unless a test asks for them
const QUIET = { t_inactive_s: 9999, t_stall_s: 9999, w_participation_s: 9999 };

let server: ChildProcess;
let dataDir: string;
let serverLog = "";
const openSockets: RoomSocket[] = [];

async function waitFor(cond: () => boolean, what: string, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}\nserver output:\n${serverLog}`);
}

function client(sessionId: string, participantId?: string): { socket: RoomSocket; shell: AppShell; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.append(root);
  let socket: RoomSocket;
  const shell = new AppShell(root, (cmd, data) => socket.send(cmd, data));
  socket = new RoomSocket(
    sessionUrl(BASE, sessionId, participantId),
    { onFrame: (f) => shell.onFrame(f) },
    WS
  );
  socket.connect();
  openSockets.push(socket);
  return { socket, shell, root };
}

async function joined(sessionId: string, name: string) {
  const c = client(sessionId);
  await waitFor(() => c.socket.open, `socket for ${name}`);
  c.socket.send("join", { display_name: name });
  await waitFor(() => c.shell.store.view.participantId !== null, `${name} to join`);
  return c;
}

function comparable(view: SessionView) {
  const { lastSeq, participants, notes, links, chat, eventCounts, pendingNudges } = view;
  return { lastSeq, participants, notes, links, chat, eventCounts, pendingNudges };
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "teamroom-web-"));
  const env = { ...process.env };
  delete env.TEAMROOM_PROVIDER_URL; // force the deterministic mock provider
  server = spawn(
    "python3",
    ["-m", "teamroom.cli", "serve", "--bind", `127.0.0.1:${PORT}`, "--data-dir", dataDir, "--tick", "0.25"],
    { env, stdio: ["ignore", "pipe", "pipe"] }
  );
  server.stdout?.on("data", (chunk) => (serverLog += chunk));
  server.stderr?.on("data", (chunk) => (serverLog += chunk));

  await waitFor(() => serverLog.includes("Uvicorn running"), "server to start", 30_000);
  await waitFor(() => {
    void fetch(`${BASE}/health`)
      .then((res) => (serverLog += res.ok ? "\n[probe] health ok" : ""))
      .catch(() => undefined);
    return serverLog.includes("[probe] health ok");
  }, "health endpoint");
}, 45_000);

afterEach(() => {
  for (const socket of openSockets.splice(0)) {
    socket.close();
  }
  document.body.innerHTML = "";
});

afterAll(() => {
  server?.kill();
  if (dataDir) {
    rmSync(dataDir, { recursive: true, force: true });
  }
});

describe("two clients on one session", () => {
  it("converges after notes are created, linked, and deleted", async () => {
    const { session_id } = await createSession(BASE, {
      session_id: "rt-board",
      mode: "orchestrated",
      task_prompt: "build a paper tower",
      trigger_params: QUIET,
    });

    const ava = await joined(session_id, "Ava");
    const ben = await joined(session_id, "Ben");
    await waitFor(
      () =>
        Object.keys(ava.shell.store.view.participants).length === 2 &&
        Object.keys(ben.shell.store.view.participants).length === 2,
      "both clients to see both members"
    );

    ava.socket.send("note_create", {
      kind: "text",
      content: "tower base",
      position: { x: 10, y: 20 },
    });
    ben.socket.send("note_create", {
      kind: "text",
      content: "tape the joints",
      position: { x: 220, y: 40 },
    });
    await waitFor(
      () =>
        Object.keys(ava.shell.store.view.notes).length === 2 &&
        Object.keys(ben.shell.store.view.notes).length === 2,
      "both notes everywhere"
    );

    const notes = ava.shell.store.view.notes;
    const baseId = Object.keys(notes).find((id) => notes[id].content === "tower base")!;
    const tapeId = Object.keys(notes).find((id) => notes[id].content === "tape the joints")!;
    ava.socket.send("link_create", { from: baseId, to: tapeId });
    await waitFor(
      () =>
        Object.keys(ava.shell.store.view.links).length === 1 &&
        Object.keys(ben.shell.store.view.links).length === 1,
      "the link everywhere"
    );

    // deleting an endpoint removes the link with it, on every client
    ben.socket.send("note_delete", { note_id: baseId });
    await waitFor(
      () =>
        Object.keys(ava.shell.store.view.notes).length === 1 &&
        Object.keys(ben.shell.store.view.notes).length === 1 &&
        Object.keys(ava.shell.store.view.links).length === 0 &&
        Object.keys(ben.shell.store.view.links).length === 0,
      "the cascade everywhere"
    );

    expect(comparable(ben.shell.store.view)).toEqual(comparable(ava.shell.store.view));
    expect(ava.root.querySelectorAll("[data-note-id]")).toHaveLength(1);
    expect(ava.root.querySelectorAll("line.note-link")).toHaveLength(0);

    // a reconnect gets a snapshot the locally folded view agrees with
    const avaId = ava.shell.store.view.participantId!;
    let snap: SnapshotFrame | null = null;
    const again = new RoomSocket(
      sessionUrl(BASE, session_id, avaId),
      { onFrame: (f) => (snap = f.frame === "snapshot" ? f : snap) },
      WS
    );
    again.connect();
    openSockets.push(again);
    await waitFor(() => snap !== null, "the reconnect snapshot");
    expect(snap!.participant_id).toBe(avaId);
    expect(snapshotDiff(ava.shell.store.view, snap!.state)).toEqual([]);
  }, 30_000);

  it("flashes the lightbulb on a forced trigger until the prompt is viewed", async () => {
    const { session_id } = await createSession(BASE, {
      session_id: "rt-bulb",
      mode: "orchestrated",
      task_prompt: "build a paper tower",
      // one second of silence is enough; a huge cooldown keeps it from refiring
      trigger_params: { ...QUIET, t_inactive_s: 1, cooldown_s: 9999, tick_s: 0.25 },
    });

    const ava = await joined(session_id, "Ava");
    const ben = await joined(session_id, "Ben");
    // Ben acts after Ava, so her silence is the one with a peer acting later
    ben.socket.send("chat", { body: "checking in" });

    await waitFor(
      () => lightbulbFlashing(ava.shell.store.view) && lightbulbFlashing(ben.shell.store.view),
      "the nudge to land on both clients"
    );
    const nudge = ben.shell.store.view.pendingNudges[0];
    expect(nudge.kind).toBe("inactivity");
    expect(nudge.target).toBe(ava.shell.store.view.participantId);

    const bulb = ben.root.querySelector<HTMLButtonElement>(".lightbulb-icon")!;
    expect(bulb.classList.contains("flashing")).toBe(true);
    const panel = ben.root.querySelector<HTMLElement>(".lightbulb-panel")!;
    expect(panel.hidden).toBe(true);

    // viewing the prompt is the acknowledgement
    bulb.click();
    expect(panel.hidden).toBe(false);
    expect(panel.querySelector(".nudge-message")?.textContent).toBeTruthy();

    await waitFor(
      () => !lightbulbFlashing(ava.shell.store.view) && !lightbulbFlashing(ben.shell.store.view),
      "the ack to clear the bulb everywhere"
    );
    expect(bulb.classList.contains("flashing")).toBe(false);
    expect(ava.root.querySelector(".lightbulb-icon")!.classList.contains("flashing")).toBe(false);

    // and it stays dark: the cooldown blocks a refire even though Ava is still quiet
    await new Promise((r) => setTimeout(r, 1_200));
    expect(ben.shell.store.view.pendingNudges).toHaveLength(0);
  }, 30_000);

  it("answers an @boss mention with an intent-badged reply", async () => {
    const { session_id } = await createSession(BASE, {
      session_id: "rt-mention",
      mode: "orchestrated",
      task_prompt: "build a paper tower",
      trigger_params: QUIET,
    });

    const ava = await joined(session_id, "Ava");
    const ben = await joined(session_id, "Ben");
    ava.socket.send("chat", { body: "@boss help us plan who does what" });

    const agentLine = (view: SessionView) => view.chat.find((line) => line.agent);
    await waitFor(
      () => agentLine(ava.shell.store.view) !== undefined && agentLine(ben.shell.store.view) !== undefined,
      "the agent reply on both clients"
    );

    const reply = agentLine(ben.shell.store.view)!;
    expect(reply.intent).toBe("planning");
    expect(reply.author).toBe("planning");

    const rendered = ava.root.querySelector(".agent-line")!;
    expect(rendered.querySelector(".chat-author")?.textContent).toBe("Planning Agent");
    expect(rendered.querySelector(".intent-badge")?.textContent).toBe("planning");
  }, 30_000);
});
