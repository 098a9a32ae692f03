// Chat pane: the message list plus the composer. Agent replies carry the
// answering agent's name and an intent badge; typing "@" offers the boss
// mention, which is the only address the server routes.

import { BOSS_MENTION } from "../protocol.js";
import type { SessionView, ChatLine } from "../store.js";
import type { SendCommand } from "./whiteboard.js";

export const AGENT_LABELS: Record<string, string> = {
  planning: "Planning Agent",
  monitoring: "Monitoring Agent",
  reflection: "Reflection Agent",
  knowledge: "Knowledge Agent",
  assistant: "Assistant",
};

export function agentLabel(agentId: string): string {
  return AGENT_LABELS[agentId] ?? agentId;
}

function lineElement(line: ChatLine, view: SessionView): HTMLElement {
  const el = document.createElement("div");
  el.dataset.seq = String(line.seq);

  const name = document.createElement("span");
  name.className = "chat-author";

  if (line.agent) {
    el.className = "chat-line agent-line";
    name.textContent = agentLabel(line.author);
    el.append(name);
    if (line.intent !== null) {
      const badge = document.createElement("span");
      badge.className = `intent-badge intent-${line.intent}`;
      badge.textContent = line.intent;
      el.append(badge);
    }
  } else {
    el.className = "chat-line student-line";
    name.textContent = view.participants[line.author]?.displayName ?? line.author;
    el.append(name);
  }

  const body = document.createElement("p");
  body.className = "chat-body";
  body.textContent = line.body;
  el.append(body);
  return el;
}

export class ChatPane {
  readonly el: HTMLElement;
  private list: HTMLElement;
  private input: HTMLInputElement;
  private suggestion: HTMLButtonElement;

  constructor(private send: SendCommand) {
    this.el = document.createElement("div");
    this.el.className = "chat-pane";

    this.list = document.createElement("div");
    this.list.className = "chat-list";

    const composer = document.createElement("form");
    composer.className = "composer";
    this.input = document.createElement("input");
    this.input.className = "composer-input";
    this.input.placeholder = `Message the group (${BOSS_MENTION} to ask the agents)`;

    this.suggestion = document.createElement("button");
    this.suggestion.type = "button";
    this.suggestion.className = "mention-suggestion";
    this.suggestion.textContent = BOSS_MENTION;
    this.suggestion.hidden = true;
    this.suggestion.addEventListener("click", () => {
      this.input.value = this.input.value.replace(/@\w*$/, BOSS_MENTION + " ");
      this.suggestion.hidden = true;
      this.input.focus();
    });

    this.input.addEventListener("input", () => {
      // a trailing "@..." word means the user is addressing someone
      this.suggestion.hidden = !/(^|\s)@\w*$/.test(this.input.value);
    });

    const sendButton = document.createElement("button");
    sendButton.type = "submit";
    sendButton.className = "composer-send";
    sendButton.textContent = "send";

    composer.addEventListener("submit", (e) => {
      e.preventDefault();
      const body = this.input.value.trim();
      if (!body) return;
      this.send("chat", { body });
      this.input.value = "";
      this.suggestion.hidden = true;
    });

    composer.append(this.input, this.suggestion, sendButton);
    this.el.append(this.list, composer);
  }

  render(view: SessionView): void {
    this.list.textContent = "";
    for (const line of view.chat) {
      this.list.append(lineElement(line, view));
    }
    this.list.scrollTop = this.list.scrollHeight;
  }
}
