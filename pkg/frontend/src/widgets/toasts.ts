// Inline toasts for server rejections. A rejected command never changes the
// view, so this is the only place the user learns something bounced.

import type { RejectionFrame } from "../protocol.js";

const TOAST_MS = 4000;

export class ToastArea {
  readonly el: HTMLElement;

  constructor() {
    this.el = document.createElement("div");
    this.el.className = "toasts";
  }

  show(rejection: RejectionFrame): void {
    const toast = document.createElement("div");
    toast.className = `toast toast-${rejection.code}`;
    const what = rejection.command ? `${rejection.command}: ` : "";
    toast.textContent = `${what}${rejection.message}`;
    this.el.append(toast);
    setTimeout(() => toast.remove(), TOAST_MS);
  }
}
