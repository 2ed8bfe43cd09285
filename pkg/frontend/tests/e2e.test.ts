/**
 * Live end-to-end run against a real collection service.
 *
 * Set SERVICE_URL (e.g. http://127.0.0.1:8321) before running; skipped
 * otherwise. Completes the first map block of the participant's assignment
 * (2 pilot + 5 main rounds) with scripted keys, then checks the exported
 * trajectories against the scripted paths.
 */

import { describe, expect, it } from "vitest";

import { HttpTransport } from "../src/api.js";
import { inCashier } from "../src/geometry.js";
import { SessionController } from "../src/session.js";
import type { MapDoc, Point } from "../src/types.js";
import { keysTo, nearItemGoal } from "./scripted.js";

const SERVICE_URL = process.env.SERVICE_URL ?? "";
const PARTICIPANT = process.env.E2E_PARTICIPANT ?? `e2e-${Date.now()}`;

describe.skipIf(!SERVICE_URL)("live service end-to-end", () => {
  it("completes 2 pilot + 5 main rounds with reconciled carts", async () => {
    const api = new HttpTransport(SERVICE_URL);
    const assignment = await api.getAssignment(PARTICIPANT);
    const block = assignment.rounds.slice(0, 7); // first map: 2 pilot + 5 main
    expect(block.map((r) => r.round_kind)).toEqual([
      "pilot", "pilot", "main", "main", "main", "main", "main",
    ]);

    const map: MapDoc = await api.getMap(block[0]!.map_id);
    const firstItem = map.items[0]!;
    const expectedPaths = new Map<string, Point[]>();

    for (const round of block) {
      const controller = new SessionController(api, map);
      await controller.start(PARTICIPANT, round);
      const trace: Point[] = [controller.view.position];

      for (const [dx, dy] of keysTo(map, controller.view.position, nearItemGoal(map, firstItem.name))) {
        expect(controller.move(dx, dy)).toBe(true);
        trace.push(controller.view.position);
      }
      controller.addItem();
      await controller.drain();
      // client cart equals server cart after the acknowledgment
      expect(controller.view.cart).toEqual([firstItem.id]);

      for (const [dx, dy] of keysTo(map, controller.view.position, (p) => inCashier(map, p))) {
        expect(controller.move(dx, dy)).toBe(true);
        trace.push(controller.view.position);
      }
      await controller.drain();
      const summary = await controller.finish();
      expect(summary.purchased).toEqual([firstItem.id]);
      expectedPaths.set(summary.sessionId, trace);
    }

    // exported trajectories replay the scripted key sequences' paths
    const resp = await fetch(`${SERVICE_URL}/export`);
    const exported = await resp.json();
    const mine = exported.records.filter(
      (r: { participant_id: string }) => r.participant_id === PARTICIPANT,
    );
    expect(mine.length).toBe(5); // pilots are excluded from exports
    for (const record of mine) {
      const expected = expectedPaths.get(record.session_id)!;
      const moved = record.positions.filter(
        (p: Point, i: number) =>
          i === 0 ||
          p[0] !== record.positions[i - 1][0] ||
          p[1] !== record.positions[i - 1][1],
      );
      expect(moved).toEqual(expected);
      expect(record.purchased).toEqual([firstItem.id]);
    }
  }, 120_000);
});
