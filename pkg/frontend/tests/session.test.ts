/** Controller behavior: optimistic moves, rollback, reconciliation, batching. */

import { describe, expect, it } from "vitest";

import { SessionController } from "../src/session.js";
import { nearestItem } from "../src/geometry.js";
import type { Round } from "../src/types.js";
import { FakeServer, loadBundledMap } from "./fakeServer.js";
import { keysTo, nearItemGoal } from "./scripted.js";

const MAP = loadBundledMap("seen");

function round(kind: "pilot" | "main" = "main"): Round {
  return {
    round_index: 0,
    map_id: MAP.map_id,
    caption_id: "syn00",
    caption: "A caption.",
    round_kind: kind,
  };
}

function setup(hooks = {}) {
  const server = new FakeServer({ [MAP.map_id]: MAP });
  const controller = new SessionController(server, MAP, hooks);
  return { server, controller };
}

describe("session state machine", () => {
  it("emits nothing while idle", () => {
    const { server, controller } = setup();
    expect(controller.move(1, 0)).toBe(false);
    expect(controller.addItem()).toBe(false);
    expect(server.batches.length).toBe(0);
    expect(controller.view.phase).toBe("idle");
  });

  it("starts at the entrance with an empty cart", async () => {
    const { controller } = setup();
    await controller.start("p1", round());
    expect(controller.view.phase).toBe("active");
    expect(controller.view.position).toEqual(MAP.entrance);
    expect(controller.view.cart).toEqual([]);
  });

  it("no events after completion", async () => {
    const { server, controller } = setup();
    await controller.start("p1", round());
    // walk into the cashier region: entrance (1.2,1.2), cashier x>=16.2
    for (let i = 0; i < 30; i++) controller.move(1, 0);
    await controller.drain();
    expect(controller.canFinish()).toBe(true);
    await controller.finish();
    const batchCount = server.batches.length;
    expect(controller.move(1, 0)).toBe(false);
    await controller.drain();
    expect(server.batches.length).toBe(batchCount);
    expect(controller.view.phase).toBe("completed");
  });
});

describe("optimistic movement", () => {
  it("applies the move immediately and confirms on ack", async () => {
    const { controller } = setup();
    await controller.start("p1", round());
    const before = controller.view.position;
    controller.move(1, 0);
    expect(controller.view.position[0]).toBeCloseTo(before[0] + MAP.grid_step);
    await controller.drain();
    expect(controller.view.serverPosition).toEqual(controller.view.position);
  });

  it("blocks shelf moves client-side without emitting", async () => {
    const { server, controller } = setup();
    await controller.start("p1", round());
    // walk next to the left-wall fruit shelf, then try to step into it
    for (const [dx, dy] of keysTo(MAP, MAP.entrance, nearItemGoal(MAP, "Apples"))) {
      controller.move(dx, dy);
    }
    await controller.drain();
    const sent = server.batches.flat().length;
    const ok = controller.move(-1, 0); // toward the shelf: client precheck refuses
    expect(ok).toBe(false);
    await controller.drain();
    expect(server.batches.flat().length).toBe(sent);
    expect(controller.view.position).toEqual(controller.view.serverPosition);
  });

  it("rolls back to the server position when the server rejects", async () => {
    const toasts: string[] = [];
    const server = new FakeServer({ [MAP.map_id]: MAP });
    const controller = new SessionController(server, MAP, {
      onToast: (m) => toasts.push(m),
    });
    await controller.start("p1", round());
    controller.move(1, 0);
    await controller.drain();
    const confirmed = controller.view.position;
    server.rejectNext = [0]; // force the next event to bounce
    controller.move(1, 0);
    expect(controller.view.position).not.toEqual(confirmed); // optimistic
    await controller.drain();
    expect(controller.view.position).toEqual(confirmed); // rolled back
    expect(toasts.some((t) => t.includes("rejected"))).toBe(true);
  });
});

describe("cart reconciliation", () => {
  it("client cart equals server cart after every ack", async () => {
    const { server, controller } = setup();
    await controller.start("p1", round());
    for (const [dx, dy] of keysTo(MAP, MAP.entrance, nearItemGoal(MAP, "Apples"))) {
      controller.move(dx, dy);
    }
    await controller.drain();
    const card = controller.view.nearest;
    expect(card?.adjacent).toBe(true);
    controller.addItem();
    await controller.drain();
    const session = [...server.sessions.values()][0]!;
    expect(controller.view.cart).toEqual(session.cart);
    expect(controller.view.cart.length).toBe(1);

    controller.removeItem();
    await controller.drain();
    expect(controller.view.cart).toEqual(session.cart);
    expect(controller.view.cart).toEqual([]);
  });

  it("nearest-item card matches the server ack card", async () => {
    const { server, controller } = setup();
    await controller.start("p1", round());
    controller.move(0, 1);
    await controller.drain();
    const session = [...server.sessions.values()][0]!;
    const serverCard = nearestItem(MAP, session.position);
    expect(controller.view.nearest?.item_id).toBe(serverCard?.id);
  });
});

describe("event batching", () => {
  it("keeps at most one batch in flight and buffers during flight", async () => {
    const server = new FakeServer({ [MAP.map_id]: MAP });
    let inFlight = 0;
    let maxInFlight = 0;
    const original = server.postEvents.bind(server);
    server.postEvents = async (sid, events) => {
      inFlight += 1;
      maxInFlight = Math.max(maxInFlight, inFlight);
      await new Promise((resolve) => setTimeout(resolve, 5));
      const ack = await original(sid, events);
      inFlight -= 1;
      return ack;
    };
    const controller = new SessionController(server, MAP);
    await controller.start("p1", round());
    for (let i = 0; i < 8; i++) controller.move(1, 0); // rapid keypresses
    await controller.drain();
    expect(maxInFlight).toBe(1);
    expect(server.batches.length).toBeGreaterThanOrEqual(2); // buffered then flushed
    expect(server.batches.flat().length).toBe(8); // nothing lost
  });

  it("timesteps are strictly increasing across batches", async () => {
    const { server, controller } = setup();
    await controller.start("p1", round());
    controller.move(1, 0);
    controller.tickIdle();
    controller.tickIdle();
    controller.move(1, 0);
    await controller.drain();
    const ts = server.batches.flat().map((e) => e.t);
    expect(ts).toEqual([...ts].sort((a, b) => a - b));
    expect(new Set(ts).size).toBe(ts.length);
    expect(ts[1]! - ts[0]!).toBeGreaterThanOrEqual(3); // idle ticks left a gap
  });
});
