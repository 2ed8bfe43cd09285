/** Keybindings: arrows move, A adds, R removes, Enter finishes. */

import type { SessionController } from "./session.js";

export interface KeyActions {
  onFinish: () => void;
}

export function installKeys(
  controller: () => SessionController | null,
  actions: KeyActions,
  target: Pick<Window, "addEventListener"> = window,
): void {
  target.addEventListener("keydown", (event: KeyboardEvent) => {
    const active = controller();
    if (!active) return;
    switch (event.code) {
      case "ArrowUp":
        event.preventDefault();
        active.move(0, 1);
        break;
      case "ArrowDown":
        event.preventDefault();
        active.move(0, -1);
        break;
      case "ArrowLeft":
        event.preventDefault();
        active.move(-1, 0);
        break;
      case "ArrowRight":
        event.preventDefault();
        active.move(1, 0);
        break;
      case "KeyA":
        active.addItem();
        break;
      case "KeyR":
        active.removeItem();
        break;
      case "Enter":
        if (active.canFinish()) actions.onFinish();
        break;
    }
  });
}
