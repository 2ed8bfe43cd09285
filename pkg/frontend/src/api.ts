/** HTTP transport for the collection service. */

import type {
  Assignment,
  CompleteResponse,
  EventAck,
  MapDoc,
  SessionView,
  Transport,
  WireEvent,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!resp.ok) {
    let code = "http_error";
    let message = `${resp.status}`;
    try {
      const body = await resp.json();
      code = body?.error?.code ?? body?.detail?.code ?? code;
      message = body?.error?.message ?? body?.detail?.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class HttpTransport implements Transport {
  constructor(private baseUrl: string = "") {}

  getMap(mapId: string): Promise<MapDoc> {
    return request(`${this.baseUrl}/maps/${encodeURIComponent(mapId)}`);
  }

  getAssignment(participantId: string): Promise<Assignment> {
    return request(`${this.baseUrl}/assignments/${encodeURIComponent(participantId)}`);
  }

  createSession(body: {
    participant_id: string;
    map_id: string;
    caption_id: string;
    round_kind: string;
  }): Promise<SessionView> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  postEvents(sessionId: string, events: WireEvent[]): Promise<EventAck> {
    return request(`${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/events`, {
      method: "POST",
      body: JSON.stringify({ events }),
    });
  }

  complete(sessionId: string): Promise<CompleteResponse> {
    return request(`${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/complete`, {
      method: "POST",
    });
  }
}
