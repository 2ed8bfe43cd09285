/**
 * Live-session state machine with optimistic movement.
 *
 * - idle -> active -> completed; inputs outside `active` emit nothing.
 * - Arrow moves render immediately and queue an event; a server rejection
 *   rolls the avatar back to the server-confirmed position and drops the
 *   rest of the optimistic queue.
 * - At most one event batch is in flight; input queued during flight is
 *   flushed right after the acknowledgment.
 * - The cart is server-authoritative: it always equals the last ack's cart.
 */

import { dist, inCashier, isFree, nearestItem, snapToGrid } from "./geometry.js";
import type {
  CompleteResponse,
  EventResult,
  MapDoc,
  NearestItemCard,
  Point,
  Round,
  Transport,
  WireEvent,
} from "./types.js";

export type Phase = "idle" | "active" | "completed";

export interface ViewState {
  phase: Phase;
  position: Point;
  serverPosition: Point;
  cart: string[];
  caption: string;
  roundKind: string;
  roundIndex: number;
  nearest: NearestItemCard | null;
  stepsTaken: number;
  pendingEvents: number;
}

export interface SessionSummary {
  sessionId: string;
  purchased: string[];
  stepsTaken: number;
  trajectoryLength: number;
}

export interface ControllerHooks {
  onChange?: () => void;
  onToast?: (message: string) => void;
}

export class SessionController {
  private phase: Phase = "idle";
  private sessionId = "";
  private round: Round | null = null;
  private position: Point = [0, 0];
  private serverPosition: Point = [0, 0];
  private cart: string[] = [];
  private t = 0;
  private queue: WireEvent[] = [];
  private inFlight: Promise<void> | null = null;
  private steps = 0;

  constructor(
    private api: Transport,
    readonly map: MapDoc,
    private hooks: ControllerHooks = {},
  ) {}

  get view(): ViewState {
    const item = nearestItem(this.map, this.position);
    return {
      phase: this.phase,
      position: this.position,
      serverPosition: this.serverPosition,
      cart: [...this.cart],
      caption: this.round?.caption ?? "",
      roundKind: this.round?.round_kind ?? "",
      roundIndex: this.round?.round_index ?? -1,
      nearest: item
        ? {
            item_id: item.id,
            name: item.name,
            category: item.category,
            attributes: item.attributes,
            adjacent: dist(item.position, this.position) <= this.map.reach_distance,
          }
        : null,
      stepsTaken: this.steps,
      pendingEvents: this.queue.length,
    };
  }

  async start(participantId: string, round: Round): Promise<void> {
    if (this.phase !== "idle") {
      throw new Error(`cannot start from phase '${this.phase}'`);
    }
    const session = await this.api.createSession({
      participant_id: participantId,
      map_id: round.map_id,
      caption_id: round.caption_id,
      round_kind: round.round_kind,
    });
    this.sessionId = session.session_id;
    this.round = round;
    this.position = session.position;
    this.serverPosition = session.position;
    this.cart = session.cart;
    this.t = 0;
    this.steps = 0;
    this.phase = "active";
    this.hooks.onChange?.();
  }

  /** Optimistic one-cell move; false when blocked client-side. */
  move(dx: -1 | 0 | 1, dy: -1 | 0 | 1): boolean {
    if (this.phase !== "active") return false;
    if (dx !== 0 && dy !== 0) return false;
    const g = this.map.grid_step;
    const target = snapToGrid(this.map, [
      this.position[0] + dx * g,
      this.position[1] + dy * g,
    ]);
    if (!isFree(this.map, target, this.map.agent_radius)) {
      this.hooks.onToast?.("blocked");
      return false;
    }
    this.position = target;
    this.steps += 1;
    this.enqueue({ kind: "move", t: ++this.t, position: target });
    return true;
  }

  /** Queue a cart_add for the adjacent item shown on the card. */
  addItem(): boolean {
    return this.cartOp("cart_add");
  }

  removeItem(): boolean {
    return this.cartOp("cart_remove");
  }

  private cartOp(kind: "cart_add" | "cart_remove"): boolean {
    if (this.phase !== "active") return false;
    const card = this.view.nearest;
    if (!card || !card.adjacent) {
      this.hooks.onToast?.("no adjacent item");
      return false;
    }
    this.enqueue({ kind, t: ++this.t, item_id: card.item_id });
    return true;
  }

  /** Advance the client clock without an event; pauses become timestep gaps. */
  tickIdle(): void {
    if (this.phase === "active") {
      this.t += 1;
    }
  }

  private enqueue(event: WireEvent): void {
    this.queue.push(event);
    this.hooks.onChange?.();
    void this.flush();
  }

  /** Send queued events unless a batch is already in flight. */
  flush(): Promise<void> {
    if (this.inFlight) return this.inFlight;
    if (this.queue.length === 0 || this.phase !== "active") return Promise.resolve();
    const batch = this.queue;
    this.queue = [];
    this.inFlight = this.api
      .postEvents(this.sessionId, batch)
      .then((ack) => {
        this.serverPosition = ack.position;
        this.cart = ack.cart; // reconciliation: client cart == server cart after every ack
        const rejected = ack.results.filter((r: EventResult) => !r.accepted);
        if (rejected.length > 0) {
          // roll back: the server position is authoritative and the remaining
          // optimistic queue built on a position that never happened
          this.position = ack.position;
          this.queue = [];
          this.hooks.onToast?.(`rejected: ${rejected.map((r) => r.reason).join(", ")}`);
        }
      })
      .finally(() => {
        this.inFlight = null;
        this.hooks.onChange?.();
        if (this.queue.length > 0) void this.flush();
      });
    return this.inFlight;
  }

  /** Wait until every queued event is acknowledged. */
  async drain(): Promise<void> {
    while (this.inFlight || this.queue.length > 0) {
      await (this.inFlight ?? this.flush());
    }
  }

  canFinish(): boolean {
    return this.phase === "active" && inCashier(this.map, this.position);
  }

  async finish(): Promise<SessionSummary> {
    if (!this.canFinish()) {
      throw new Error("finish requires the avatar inside the cashier region");
    }
    await this.drain();
    const done: CompleteResponse = await this.api.complete(this.sessionId);
    this.phase = "completed";
    this.cart = done.cart;
    this.hooks.onChange?.();
    return {
      sessionId: this.sessionId,
      purchased: done.trajectory.purchased,
      stepsTaken: this.steps,
      trajectoryLength: done.trajectory.positions.length,
    };
  }
}
