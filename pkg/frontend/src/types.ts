/** Wire types mirroring the collection-service HTTP contract. */

export type Point = [number, number];

export interface ShelfDoc {
  rect: [number, number, number, number];
  category: string;
}

export interface ItemDoc {
  id: string;
  name: string;
  category: string;
  position: Point;
  attributes: Record<string, string>;
}

export interface MapDoc {
  map_id: string;
  width: number;
  height: number;
  entrance: Point;
  cashier: { rect: [number, number, number, number] };
  agent_radius: number;
  reach_distance: number;
  shelves: ShelfDoc[];
  items: ItemDoc[];
  category_base_ranks: Record<string, number>;
  grid_step: number;
  label?: string;
}

export interface Round {
  round_index: number;
  map_id: string;
  caption_id: string;
  caption: string;
  round_kind: "pilot" | "main";
}

export interface Assignment {
  participant_id: string;
  rounds: Round[];
}

export interface NearestItemCard {
  item_id: string;
  name: string;
  category: string;
  attributes: Record<string, string>;
  adjacent: boolean;
}

export interface SessionView {
  session_id: string;
  participant_id: string;
  map_id: string;
  caption_id: string;
  round_kind: string;
  state: "active" | "completed" | "abandoned";
  position: Point;
  cart: string[];
  event_count: number;
  nearest_item: NearestItemCard | null;
}

export interface WireEvent {
  kind: "move" | "cart_add" | "cart_remove";
  t: number;
  position?: Point;
  item_id?: string;
}

export interface EventResult {
  index: number;
  accepted: boolean;
  reason: string;
}

export interface EventAck extends SessionView {
  results: EventResult[];
}

export interface TrajectoryDoc {
  caption_id: string;
  map_id: string;
  provenance: string;
  positions: Point[];
  items_in_contact: string[];
  purchased: string[];
  flags: string[];
}

export interface CompleteResponse extends SessionView {
  trajectory: TrajectoryDoc;
}

/** Transport boundary: the real HTTP client and the test fake implement this. */
export interface Transport {
  getMap(mapId: string): Promise<MapDoc>;
  getAssignment(participantId: string): Promise<Assignment>;
  createSession(body: {
    participant_id: string;
    map_id: string;
    caption_id: string;
    round_kind: string;
  }): Promise<SessionView>;
  postEvents(sessionId: string, events: WireEvent[]): Promise<EventAck>;
  complete(sessionId: string): Promise<CompleteResponse>;
}
