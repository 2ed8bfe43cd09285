/** Client-side copies of the store geometry rules (must match the server). */

import type { MapDoc, ItemDoc, Point } from "./types.js";

export function dist(a: Point, b: Point): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1]);
}

function rectDistance(rect: [number, number, number, number], p: Point): number {
  const dx = Math.max(rect[0] - p[0], 0, p[0] - rect[2]);
  const dy = Math.max(rect[1] - p[1], 0, p[1] - rect[3]);
  return Math.hypot(dx, dy);
}

/** Disc of `radius` at p stays inside bounds and touches no shelf. */
export function isFree(map: MapDoc, p: Point, radius: number): boolean {
  if (
    p[0] - radius < 0 ||
    p[1] - radius < 0 ||
    p[0] + radius > map.width ||
    p[1] + radius > map.height
  ) {
    return false;
  }
  return map.shelves.every((s) => rectDistance(s.rect, p) >= radius);
}

export function inCashier(map: MapDoc, p: Point): boolean {
  const [x0, y0, x1, y1] = map.cashier.rect;
  return p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
}

/** Nearest catalog item; ties break on the lowest item id, like the server. */
export function nearestItem(map: MapDoc, p: Point): ItemDoc | null {
  let best: ItemDoc | null = null;
  let bestDist = Infinity;
  for (const item of map.items) {
    const d = dist(item.position, p);
    if (d < bestDist || (d === bestDist && best !== null && item.id < best.id)) {
      best = item;
      bestDist = d;
    }
  }
  return best;
}

/** Snap to the keypress lattice anchored at the entrance. */
export function snapToGrid(map: MapDoc, p: Point): Point {
  const [ex, ey] = map.entrance;
  const g = map.grid_step;
  return [ex + Math.round((p[0] - ex) / g) * g, ey + Math.round((p[1] - ey) / g) * g];
}
