/** Bootstrap: fetch the participant's assignment and run rounds in order. */

import { HttpTransport } from "./api.js";
import { installKeys } from "./keys.js";
import { render } from "./render.js";
import type { RenderTargets } from "./render.js";
import { SessionController } from "./session.js";
import type { Assignment, MapDoc } from "./types.js";

const IDLE_TICK_MS = 500;

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function run(): Promise<void> {
  const api = new HttpTransport("");
  const params = new URLSearchParams(window.location.search);
  const participant =
    params.get("participant") ?? window.prompt("participant id") ?? "anonymous";

  const targets: RenderTargets = {
    canvas: requireElement<HTMLCanvasElement>("store-canvas"),
    itemCard: requireElement("item-card"),
    cartList: requireElement("cart-list"),
    captionBar: requireElement("caption-bar"),
    roundBanner: requireElement("round-banner"),
    statusLine: requireElement("status-line"),
  };

  const assignment: Assignment = await api.getAssignment(participant);
  const maps = new Map<string, MapDoc>();
  for (const round of assignment.rounds) {
    if (!maps.has(round.map_id)) {
      maps.set(round.map_id, await api.getMap(round.map_id));
    }
  }

  let controller: SessionController | null = null;
  let finishing = false;

  const repaint = () => {
    if (controller) render(controller.map, controller.view, targets);
  };

  installKeys(
    () => controller,
    {
      onFinish: () => {
        if (!controller || finishing) return;
        finishing = true;
        controller
          .finish()
          .then((summary) => {
            targets.statusLine.textContent =
              `round done: ${summary.purchased.length} item(s) purchased in ` +
              `${summary.stepsTaken} steps`;
          })
          .catch((err) => {
            targets.statusLine.textContent = `finish failed: ${err}`;
          })
          .finally(() => {
            finishing = false;
            advance();
          });
      },
    },
  );

  let cursor = 0;
  const advance = () => {
    if (cursor >= assignment.rounds.length) {
      targets.roundBanner.textContent = "all rounds complete - thank you!";
      controller = null;
      return;
    }
    const round = assignment.rounds[cursor]!;
    cursor += 1;
    const map = maps.get(round.map_id)!;
    controller = new SessionController(api, map, {
      onChange: repaint,
      onToast: (msg) => {
        targets.statusLine.textContent = msg;
      },
    });
    controller
      .start(participant, round)
      .then(repaint)
      .catch((err) => {
        targets.statusLine.textContent = `could not start round: ${err}`;
      });
  };

  window.setInterval(() => {
    controller?.tickIdle();
  }, IDLE_TICK_MS);
  window.addEventListener("resize", repaint);
  advance();
}

run().catch((err) => {
  document.body.textContent = `failed to start: ${err}`;
});
