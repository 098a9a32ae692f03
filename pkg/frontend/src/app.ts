// Puts the pieces together: one store, one socket, three panes. The
// lightbulb is mounted only when the snapshot says the session is
// orchestrated; a generic session simply has no icon anywhere.

import type { ServerFrame } from "./protocol.js";
import { SessionStore } from "./store.js";
import { ChatPane } from "./widgets/chat.js";
import { LightbulbIndicator } from "./widgets/lightbulb.js";
import { ToastArea } from "./widgets/toasts.js";
import { WhiteboardView, type SendCommand } from "./widgets/whiteboard.js";

export class AppShell {
  readonly store = new SessionStore();
  readonly toasts: ToastArea;
  private whiteboard: WhiteboardView;
  private chat: ChatPane;
  private lightbulb: LightbulbIndicator | null = null;
  private boardWrap: HTMLElement;
  private status: HTMLElement;

  constructor(root: HTMLElement, private send: SendCommand) {
    this.toasts = new ToastArea();
    this.whiteboard = new WhiteboardView(send);
    this.chat = new ChatPane(send);

    this.boardWrap = document.createElement("div");
    this.boardWrap.className = "board-wrap";
    this.boardWrap.append(this.whiteboard.el);

    this.status = document.createElement("div");
    this.status.className = "session-status";

    root.append(this.status, this.boardWrap, this.chat.el, this.toasts.el);

    this.store.subscribe((view, frame) => {
      if (frame.frame === "rejection") {
        this.toasts.show(frame);
        return; // rejections never change the view
      }
      if (view.mode === "orchestrated" && this.lightbulb === null) {
        this.lightbulb = new LightbulbIndicator(this.send);
        this.boardWrap.append(this.lightbulb.el);
      }
      this.whiteboard.render(view);
      this.chat.render(view);
      this.lightbulb?.render(view);
      const who = view.participantId
        ? view.participants[view.participantId]?.displayName ?? view.participantId
        : "(not joined)";
      this.status.textContent = `${who} | ${view.mode} | ${
        Object.keys(view.participants).length
      } members | ${view.taskPrompt}`;
    });
  }

  onFrame(frame: ServerFrame): void {
    this.store.onFrame(frame);
  }
}
