// Browser entry point. Query string picks the room:
//   ?session=abc123&name=Ava            join as a new member
//   ?session=abc123&participant=u2      reattach an existing member

import { AppShell } from "./app.js";
import { RoomSocket, sessionUrl } from "./socket.js";

const params = new URLSearchParams(location.search);
const sessionId = params.get("session");
const name = params.get("name") ?? "Student";
const participantId = params.get("participant") ?? undefined;

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}

if (!sessionId) {
  root.textContent = "Add ?session=<id>&name=<you> to the URL to join a room.";
} else {
  const socket = new RoomSocket(
    sessionUrl(location.origin, sessionId, participantId),
    {
      onFrame: (frame) => shell.onFrame(frame),
      onOpen: () => {
        if (!participantId) {
          socket.send("join", { display_name: name });
        }
      },
      onClose: () => {
        root.classList.add("disconnected");
      },
    }
  );
  const shell = new AppShell(root, (cmd, data) => socket.send(cmd, data));
  socket.connect();
}
