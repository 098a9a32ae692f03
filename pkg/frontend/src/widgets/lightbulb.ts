// The lightbulb sits at the whiteboard's top-right. It flashes exactly while
// the server says it should (pending nudges in the view) and never decides
// anything on its own. Opening the prompt panel is the "I saw it" gesture:
// it sends lightbulb_ack, and the icon stops on the resulting broadcast.

import { lightbulbFlashing, type SessionView } from "../store.js";
import type { SendCommand } from "./whiteboard.js";

export class LightbulbIndicator {
  readonly el: HTMLElement;
  private icon: HTMLButtonElement;
  private panel: HTMLElement;
  private panelOpen = false;

  constructor(private send: SendCommand) {
    this.el = document.createElement("div");
    this.el.className = "lightbulb";

    this.icon = document.createElement("button");
    this.icon.className = "lightbulb-icon";
    this.icon.textContent = "\u{1F4A1}";
    this.icon.title = "group nudges";
    this.icon.addEventListener("click", () => this.openPanel());

    this.panel = document.createElement("div");
    this.panel.className = "lightbulb-panel";
    this.panel.hidden = true;

    this.el.append(this.icon, this.panel);
  }

  private openPanel(): void {
    this.panelOpen = !this.panelOpen;
    this.panel.hidden = !this.panelOpen;
    if (this.panelOpen && this.icon.classList.contains("flashing")) {
      // viewing the prompt acknowledges it for the whole group
      this.send("lightbulb_ack", {});
    }
  }

  render(view: SessionView): void {
    const flashing = lightbulbFlashing(view);
    this.icon.classList.toggle("flashing", flashing);

    this.panel.textContent = "";
    const prompts = view.pendingNudges;
    if (prompts.length === 0) {
      const quiet = document.createElement("p");
      quiet.className = "lightbulb-empty";
      quiet.textContent = "No nudges right now.";
      this.panel.append(quiet);
      return;
    }
    for (const nudge of prompts) {
      const item = document.createElement("div");
      item.className = `nudge nudge-${nudge.kind}`;
      const who =
        nudge.target === null
          ? "everyone"
          : view.participants[nudge.target]?.displayName ?? nudge.target;
      const label = document.createElement("span");
      label.className = "nudge-target";
      label.textContent = who;
      const text = document.createElement("p");
      text.className = "nudge-message";
      text.textContent = nudge.message;
      item.append(label, text);
      this.panel.append(item);
    }
  }
}
