// Whiteboard canvas: absolutely positioned note cards over an SVG link
// layer. Dragging a card emits note_update with the new position; the card
// itself snaps to wherever the server's broadcast says it is, so every
// member converges on the same layout.

import type { SessionView, NoteView } from "../store.js";

export type SendCommand = (cmd: string, data?: Record<string, unknown>) => void;

const URL_RE = /^https?:\/\//i;

function noteBody(note: NoteView): HTMLElement {
  if (note.kind === "text") {
    const div = document.createElement("div");
    div.className = "note-text";
    div.textContent = note.content;
    return div;
  }
  if (note.kind === "image" && URL_RE.test(note.content)) {
    const img = document.createElement("img");
    img.className = "note-image";
    img.src = note.content;
    img.alt = "note image";
    return img;
  }
  if (note.kind === "video" && URL_RE.test(note.content)) {
    const video = document.createElement("video");
    video.className = "note-video";
    video.src = note.content;
    video.controls = true;
    return video;
  }
  // opaque reference that isn't a URL: labeled placeholder
  const div = document.createElement("div");
  div.className = "note-placeholder";
  div.textContent = `${note.kind}: ${note.content}`;
  return div;
}

export class WhiteboardView {
  readonly el: HTMLElement;
  private linkLayer: SVGSVGElement;
  private noteLayer: HTMLElement;
  private linkButton: HTMLButtonElement;
  private linkMode = false;
  private linkFirst: string | null = null;
  private drag: { noteId: string; startX: number; startY: number; origX: number; origY: number } | null =
    null;
  private view: SessionView | null = null;

  constructor(private send: SendCommand) {
    this.el = document.createElement("div");
    this.el.className = "whiteboard";

    this.linkLayer = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    this.linkLayer.setAttribute("class", "link-layer");
    this.noteLayer = document.createElement("div");
    this.noteLayer.className = "note-layer";

    const toolbar = document.createElement("div");
    toolbar.className = "board-toolbar";
    this.linkButton = document.createElement("button");
    this.linkButton.className = "link-tool";
    this.linkButton.textContent = "link notes";
    this.linkButton.addEventListener("click", () => this.toggleLinkMode());
    const addButton = document.createElement("button");
    addButton.className = "add-note";
    addButton.textContent = "add note";
    addButton.addEventListener("click", () => {
      this.send("note_create", {
        kind: "text",
        content: "",
        position: { x: 40 + Math.random() * 200, y: 40 + Math.random() * 120 },
      });
    });
    toolbar.append(addButton, this.linkButton);

    this.el.append(toolbar, this.linkLayer, this.noteLayer);

    document.addEventListener("mousemove", (e) => this.onMouseMove(e));
    document.addEventListener("mouseup", () => this.onMouseUp());
  }

  private toggleLinkMode(): void {
    this.linkMode = !this.linkMode;
    this.linkFirst = null;
    this.linkButton.classList.toggle("active", this.linkMode);
    this.el.classList.toggle("linking", this.linkMode);
  }

  private onNoteMouseDown(noteId: string, e: MouseEvent): void {
    if (this.linkMode) {
      if (this.linkFirst === null) {
        this.linkFirst = noteId;
        this.markSelected(noteId);
      } else if (this.linkFirst !== noteId) {
        this.send("link_create", { from: this.linkFirst, to: noteId });
        this.toggleLinkMode();
      }
      return;
    }
    const note = this.view?.notes[noteId];
    if (!note) return;
    this.drag = {
      noteId,
      startX: e.clientX,
      startY: e.clientY,
      origX: note.position.x,
      origY: note.position.y,
    };
  }

  private onMouseMove(e: MouseEvent): void {
    if (!this.drag) return;
    const card = this.noteLayer.querySelector<HTMLElement>(
      `[data-note-id="${this.drag.noteId}"]`
    );
    if (card) {
      card.style.left = `${this.drag.origX + e.clientX - this.drag.startX}px`;
      card.style.top = `${this.drag.origY + e.clientY - this.drag.startY}px`;
    }
  }

  private onMouseUp(): void {
    if (!this.drag) return;
    const card = this.noteLayer.querySelector<HTMLElement>(
      `[data-note-id="${this.drag.noteId}"]`
    );
    if (card) {
      const x = parseFloat(card.style.left);
      const y = parseFloat(card.style.top);
      const orig = { x: this.drag.origX, y: this.drag.origY };
      if (x !== orig.x || y !== orig.y) {
        this.send("note_update", { note_id: this.drag.noteId, position: { x, y } });
      }
    }
    this.drag = null;
  }

  private markSelected(noteId: string): void {
    const card = this.noteLayer.querySelector(`[data-note-id="${noteId}"]`);
    card?.classList.add("selected");
  }

  render(view: SessionView): void {
    this.view = view;
    this.noteLayer.textContent = "";
    this.linkLayer.textContent = "";

    for (const [noteId, note] of Object.entries(view.notes)) {
      const card = document.createElement("div");
      card.className = `note note-kind-${note.kind}`;
      card.dataset.noteId = noteId;
      card.style.position = "absolute";
      card.style.left = `${note.position.x}px`;
      card.style.top = `${note.position.y}px`;

      const author = view.participants[note.author]?.displayName ?? note.author;
      const header = document.createElement("div");
      header.className = "note-header";
      header.textContent = author;

      const remove = document.createElement("button");
      remove.className = "note-delete";
      remove.textContent = "x";
      remove.title = "delete note";
      remove.addEventListener("click", (e) => {
        e.stopPropagation();
        this.send("note_delete", { note_id: noteId });
      });
      header.append(remove);

      card.append(header, noteBody(note));
      card.addEventListener("mousedown", (e) => this.onNoteMouseDown(noteId, e as MouseEvent));
      this.noteLayer.append(card);
    }

    for (const [linkId, link] of Object.entries(view.links)) {
      const a = view.notes[link.from];
      const b = view.notes[link.to];
      if (!a || !b) continue;
      const line = document.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("class", "note-link");
      line.dataset.linkId = linkId;
      line.setAttribute("x1", String(a.position.x));
      line.setAttribute("y1", String(a.position.y));
      line.setAttribute("x2", String(b.position.x));
      line.setAttribute("y2", String(b.position.y));
      this.linkLayer.append(line);
    }
  }
}
