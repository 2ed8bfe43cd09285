/** Canvas and panel rendering: colored shelves, green avatar, cashier, cards. */

import type { MapDoc } from "./types.js";
import type { ViewState } from "./session.js";

const CATEGORY_PALETTE = [
  "#e6794a", "#4a90d9", "#6ab04c", "#d94a6e", "#9b59b6", "#f7c948",
  "#1abc9c", "#c0713a", "#7f8c8d", "#e67ee2", "#5c6bc0", "#8d6e63",
];

export function categoryColor(map: MapDoc, category: string): string {
  const categories = Object.keys(map.category_base_ranks).sort();
  const index = Math.max(0, categories.indexOf(category));
  return CATEGORY_PALETTE[index % CATEGORY_PALETTE.length] ?? "#999";
}

export interface RenderTargets {
  canvas: HTMLCanvasElement;
  itemCard: HTMLElement;
  cartList: HTMLElement;
  captionBar: HTMLElement;
  roundBanner: HTMLElement;
  statusLine: HTMLElement;
}

export function renderMap(map: MapDoc, view: ViewState, canvas: HTMLCanvasElement): void {
  const scale = Math.min(canvas.width / map.width, canvas.height / map.height);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const px = (x: number) => x * scale;
  const py = (y: number) => canvas.height - y * scale; // map y grows upward

  ctx.fillStyle = "#f4f1ea";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  // cashier region highlighted
  const [cx0, cy0, cx1, cy1] = map.cashier.rect;
  ctx.fillStyle = "#cfe8cf";
  ctx.fillRect(px(cx0), py(cy1), px(cx1 - cx0), (cy1 - cy0) * scale);
  ctx.strokeStyle = "#2e7d32";
  ctx.strokeRect(px(cx0), py(cy1), px(cx1 - cx0), (cy1 - cy0) * scale);

  // shelves colored by category
  for (const shelf of map.shelves) {
    const [x0, y0, x1, y1] = shelf.rect;
    ctx.fillStyle = categoryColor(map, shelf.category);
    ctx.fillRect(px(x0), py(y1), (x1 - x0) * scale, (y1 - y0) * scale);
  }

  // items as small dots
  ctx.fillStyle = "#333";
  for (const item of map.items) {
    ctx.beginPath();
    ctx.arc(px(item.position[0]), py(item.position[1]), 2, 0, Math.PI * 2);
    ctx.fill();
  }

  // the avatar: a green square at the current (optimistic) cell
  const side = map.grid_step * scale * 0.8;
  ctx.fillStyle = "#1db954";
  ctx.fillRect(px(view.position[0]) - side / 2, py(view.position[1]) - side / 2, side, side);
  ctx.strokeStyle = "#0a6b2d";
  ctx.strokeRect(px(view.position[0]) - side / 2, py(view.position[1]) - side / 2, side, side);
}

export function renderPanels(map: MapDoc, view: ViewState, targets: RenderTargets): void {
  const card = view.nearest;
  if (card) {
    const attrs = Object.entries(card.attributes)
      .map(([k, v]) => `${k}: ${v}`)
      .join(", ");
    targets.itemCard.innerHTML =
      `<strong>${card.name}</strong> <em>(${card.category})</em>` +
      `<br>${attrs}` +
      `<br>${card.adjacent ? "within reach - press A to add, R to remove" : "not in reach"}`;
  } else {
    targets.itemCard.textContent = "no items";
  }

  const names = view.cart.map((id) => map.items.find((it) => it.id === id)?.name ?? id);
  targets.cartList.innerHTML =
    names.length === 0 ? "<em>empty</em>" : names.map((n) => `<li>${n}</li>`).join("");

  targets.captionBar.textContent = view.caption;
  targets.roundBanner.textContent =
    view.phase === "idle"
      ? "waiting"
      : `round ${view.roundIndex + 1} (${view.roundKind}) - ${view.phase}`;
  targets.statusLine.textContent =
    `steps: ${view.stepsTaken}  pending: ${view.pendingEvents}` +
    (view.phase === "active" ? "  (Enter at the cashier to finish)" : "");
}

export function render(map: MapDoc, view: ViewState, targets: RenderTargets): void {
  renderMap(map, view, targets.canvas);
  renderPanels(map, view, targets);
}
