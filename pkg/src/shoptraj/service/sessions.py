"""Session recording: append-only event logs, replay, completion, export.

Movement is grid-stepped (one cell per keypress) on a grid anchored at the
map entrance. Every accepted event is appended to a per-session JSONL log;
sessions are fully re-derivable from their logs.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..geometry import Point, dist
from ..planner.generate import AnnotatedTrajectory
from ..storemap import StoreMap

DEFAULT_GRID_STEP = 0.5
PILOT_ROUNDS_PER_MAP = 2
MAIN_ROUNDS_PER_MAP = 5


class SessionError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class SessionEvent:
    kind: str  # "move" | "cart_add" | "cart_remove"
    t: int
    position: Point | None = None
    item_id: str | None = None

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind, "t": self.t}
        if self.position is not None:
            doc["position"] = [self.position[0], self.position[1]]
        if self.item_id is not None:
            doc["item_id"] = self.item_id
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping) -> "SessionEvent":
        position = tuple(doc["position"]) if "position" in doc else None
        return cls(
            kind=str(doc["kind"]),
            t=int(doc["t"]),
            position=position,  # type: ignore[arg-type]
            item_id=doc.get("item_id"),
        )


@dataclass
class EventResult:
    index: int
    accepted: bool
    reason: str = ""


@dataclass
class Session:
    session_id: str
    participant_id: str
    map_id: str
    caption_id: str
    round_kind: str  # "pilot" | "main"
    state: str = "active"  # "active" | "completed" | "abandoned"
    events: list[SessionEvent] = field(default_factory=list)
    position: Point = (0.0, 0.0)
    cart: list[str] = field(default_factory=list)
    started_at: float = 0.0
    ended_at: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def last_t(self) -> int:
        return self.events[-1].t if self.events else 0


@dataclass(frozen=True)
class CaptionEntry:
    caption_id: str
    caption: str
    source: str  # "synthesized" | "human"


class CaptionSet:
    def __init__(self, entries: list[CaptionEntry]):
        self.entries = entries
        self.by_id = {e.caption_id: e for e in entries}

    @classmethod
    def from_file(cls, path: str | Path) -> "CaptionSet":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    doc = json.loads(line)
                    entries.append(
                        CaptionEntry(
                            caption_id=str(doc["caption_id"]),
                            caption=str(doc["caption"]),
                            source=str(doc.get("source", "synthesized")),
                        )
                    )
        return cls(entries)

    def of_source(self, source: str) -> list[CaptionEntry]:
        return [e for e in self.entries if e.source == source]


class SessionStore:
    """Persistent session registry with per-session serialized appends."""

    def __init__(
        self,
        root: str | Path,
        maps: Mapping[str, StoreMap],
        grid_step: float = DEFAULT_GRID_STEP,
        clock=time.time,
    ):
        self.root = Path(root)
        self.maps = dict(maps)
        self.grid_step = grid_step
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self._index_lock = threading.Lock()
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        self._replay_from_disk()

    # -- persistence ---------------------------------------------------------

    def _index_path(self) -> Path:
        return self.root / "index.jsonl"

    def _events_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.jsonl"

    def _append_index(self, session: Session) -> None:
        record = {
            "session_id": session.session_id,
            "participant_id": session.participant_id,
            "map_id": session.map_id,
            "caption_id": session.caption_id,
            "round_kind": session.round_kind,
            "state": session.state,
            "started_at": session.started_at,
            "ended_at": session.ended_at,
        }
        with self._index_lock:
            with open(self._index_path(), "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _append_events(self, session: Session, events: list[SessionEvent]) -> None:
        with open(self._events_path(session.session_id), "a", encoding="utf-8", newline="\n") as fh:
            for ev in events:
                fh.write(json.dumps(ev.to_doc(), sort_keys=True) + "\n")

    def _replay_from_disk(self) -> None:
        index = self._index_path()
        if not index.exists():
            return
        with open(index, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                sid = doc["session_id"]
                session = self.sessions.get(sid)
                if session is None:
                    store = self.maps.get(doc["map_id"])
                    if store is None:
                        continue
                    session = Session(
                        session_id=sid,
                        participant_id=doc["participant_id"],
                        map_id=doc["map_id"],
                        caption_id=doc["caption_id"],
                        round_kind=doc["round_kind"],
                        position=store.entrance,
                        started_at=doc.get("started_at") or 0.0,
                    )
                    self.sessions[sid] = session
                session.state = doc["state"]
                session.ended_at = doc.get("ended_at")
        for sid, session in self.sessions.items():
            path = self._events_path(sid)
            if not path.exists():
                continue
            with open(path, "r", encoding="utf-8") as fh:
                events = [SessionEvent.from_doc(json.loads(ln)) for ln in fh if ln.strip()]
            store = self.maps[session.map_id]
            session.events = events
            session.position = store.entrance
            session.cart = []
            for ev in events:
                if ev.kind == "move" and ev.position is not None:
                    session.position = ev.position
                elif ev.kind == "cart_add" and ev.item_id is not None:
                    session.cart.append(ev.item_id)
                elif ev.kind == "cart_remove" and ev.item_id in session.cart:
                    session.cart.remove(ev.item_id)

    # -- operations ----------------------------------------------------------

    def create_session(
        self,
        participant_id: str,
        map_id: str,
        caption_id: str,
        round_kind: str,
        caption_ids: set[str] | None = None,
        session_id: str | None = None,
    ) -> Session:
        store = self.maps.get(map_id)
        if store is None:
            raise SessionError("unknown_map", f"no map '{map_id}'")
        if caption_ids is not None and caption_id not in caption_ids:
            raise SessionError("unknown_caption", f"no caption '{caption_id}'")
        if round_kind not in ("pilot", "main"):
            raise SessionError("bad_round_kind", f"round_kind '{round_kind}' must be pilot or main")
        for session in self.sessions.values():
            if session.participant_id == participant_id and session.state == "active":
                raise SessionError(
                    "active_session_exists",
                    f"participant '{participant_id}' already has active session {session.session_id}",
                )
        session = Session(
            session_id=session_id or uuid.uuid4().hex[:12],
            participant_id=participant_id,
            map_id=map_id,
            caption_id=caption_id,
            round_kind=round_kind,
            position=store.entrance,
            started_at=self.clock(),
        )
        self.sessions[session.session_id] = session
        self._append_index(session)
        return session

    def _get_active(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionError("unknown_session", f"no session '{session_id}'")
        if session.state != "active":
            raise SessionError("not_active", f"session is {session.state}")
        return session

    def snap_to_grid(self, store: StoreMap, p: Point) -> Point:
        """Snap to the keypress grid anchored at the entrance."""
        ex, ey = store.entrance
        return (
            ex + round((p[0] - ex) / self.grid_step) * self.grid_step,
            ey + round((p[1] - ey) / self.grid_step) * self.grid_step,
        )

    def _check_move(self, store: StoreMap, session: Session, ev: SessionEvent) -> str:
        if ev.position is None:
            return "missing_position"
        # strictly increasing so the materialized position at any t is unique
        if ev.t <= session.last_t():
            return "timestep_regression"
        snapped = self.snap_to_grid(store, ev.position)
        if dist(snapped, ev.position) > 1e-6:
            return "off_grid"
        dx = abs(snapped[0] - session.position[0])
        dy = abs(snapped[1] - session.position[1])
        one_step = (
            (abs(dx - self.grid_step) < 1e-6 and dy < 1e-6)
            or (abs(dy - self.grid_step) < 1e-6 and dx < 1e-6)
            or (dx < 1e-6 and dy < 1e-6)  # explicit hold-in-place tick
        )
        if not one_step:
            return "not_one_step"
        if not store.is_free(snapped, store.agent_radius):
            return "blocked"
        return ""

    def _adjacent_item(self, store: StoreMap, p: Point):
        item = store.nearest_item(p)
        if dist(item.position, p) <= store.reach_distance:
            return item
        return None

    def _check_cart(self, store: StoreMap, session: Session, ev: SessionEvent) -> str:
        if ev.item_id is None:
            return "missing_item"
        if ev.t < session.last_t():
            return "timestep_regression"
        adjacent = self._adjacent_item(store, session.position)
        if adjacent is None or adjacent.id != ev.item_id:
            return "not_adjacent"
        if ev.kind == "cart_add" and ev.item_id in session.cart:
            return "already_in_cart"
        if ev.kind == "cart_remove" and ev.item_id not in session.cart:
            return "not_in_cart"
        return ""

    def record_events(self, session_id: str, batch: list[SessionEvent]) -> list[EventResult]:
        """Validate and append a batch atomically, in order.

        Each event is accepted or rejected individually with a reason code;
        accepted events apply to the live session and append to the log.
        """
        session = self._get_active(session_id)
        store = self.maps[session.map_id]
        results: list[EventResult] = []
        accepted: list[SessionEvent] = []
        with session.lock:
            for i, ev in enumerate(batch):
                if ev.kind == "move":
                    reason = self._check_move(store, session, ev)
                elif ev.kind in ("cart_add", "cart_remove"):
                    reason = self._check_cart(store, session, ev)
                else:
                    reason = "unknown_kind"
                if reason:
                    results.append(EventResult(index=i, accepted=False, reason=reason))
                    continue
                if ev.kind == "move":
                    snapped = self.snap_to_grid(store, ev.position)  # type: ignore[arg-type]
                    ev = SessionEvent(kind="move", t=ev.t, position=snapped)
                    session.position = snapped
                elif ev.kind == "cart_add":
                    session.cart.append(ev.item_id)  # type: ignore[arg-type]
                else:
                    session.cart.remove(ev.item_id)  # type: ignore[arg-type]
                session.events.append(ev)
                accepted.append(ev)
                results.append(EventResult(index=i, accepted=True))
            if accepted:
                self._append_events(session, accepted)
        return results

    def materialize_trajectory(self, session: Session) -> AnnotatedTrajectory:
        """Positions at every timestep 0..t_last, holding between moves."""
        store = self.maps[session.map_id]
        if not session.events:
            raise SessionError("empty_log", "session has no events")
        t_last = session.last_t()
        positions: list[Point] = []
        cursor = store.entrance
        moves = {ev.t: ev.position for ev in session.events if ev.kind == "move"}
        for t in range(0, t_last + 1):
            if t in moves and moves[t] is not None:
                cursor = moves[t]  # type: ignore[assignment]
            positions.append(cursor)
        items = store.nearest_item_ids(np.asarray(positions))
        return AnnotatedTrajectory(
            positions=positions,
            items_in_contact=items,
            purchased=list(session.cart),
            provenance="human",
            map_id=session.map_id,
            caption_id=session.caption_id,
        )

    def complete_session(self, session_id: str) -> AnnotatedTrajectory:
        session = self._get_active(session_id)
        store = self.maps[session.map_id]
        with session.lock:
            if not session.events:
                raise SessionError("empty_log", "cannot complete a session with no events")
            if not store.cashier.contains(session.position):
                raise SessionError("not_at_cashier", "finish inside the cashier region")
            traj = self.materialize_trajectory(session)
            session.state = "completed"
            session.ended_at = self.clock()
            self._append_index(session)
        return traj

    def abandon_session(self, session_id: str) -> None:
        session = self._get_active(session_id)
        with session.lock:
            session.state = "abandoned"
            session.ended_at = self.clock()
            self._append_index(session)

    def export_sessions(
        self,
        map_labels: Mapping[str, str],
        caption_sources: Mapping[str, str],
        map_label: str | None = None,
        caption_source: str | None = None,
    ) -> tuple[list[AnnotatedTrajectory], list[dict], dict[str, int]]:
        """Completed main-round sessions with seen/unseen and caption-source labels."""
        trajs: list[AnnotatedTrajectory] = []
        labels: list[dict] = []
        strata: dict[str, int] = {}
        for sid in sorted(self.sessions):
            session = self.sessions[sid]
            if session.state != "completed" or session.round_kind != "main":
                continue
            m_label = map_labels.get(session.map_id, "seen")
            c_source = caption_sources.get(session.caption_id, "synthesized")
            if map_label and m_label != map_label:
                continue
            if caption_source and c_source != caption_source:
                continue
            traj = self.materialize_trajectory(session)
            trajs.append(traj)
            labels.append(
                {
                    "session_id": session.session_id,
                    "participant_id": session.participant_id,
                    "map_label": m_label,
                    "caption_source": c_source,
                    "caption_id": session.caption_id,
                    "map_id": session.map_id,
                }
            )
            strata[f"{m_label}/{c_source}"] = strata.get(f"{m_label}/{c_source}", 0) + 1
        return trajs, labels, strata


def assign_rounds(
    participant_id: str,
    captions: CaptionSet,
    map_ids: list[str],
    seed: int = 0,
) -> list[dict]:
    """Seeded per-participant round plan: 2 pilot + 5 main rounds per map.

    Map order, caption choice and caption order are all deterministic in
    (seed, participant). Main captions are split half synthesized, half
    human-created; the 2/3 per-map split alternates with the participant
    digest so a balanced cohort covers the strata evenly.
    """
    digest = hashlib.sha256(f"{seed}:{participant_id}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    maps = list(map_ids)
    rng.shuffle(maps)

    synth_pool = captions.of_source("synthesized")
    human_pool = captions.of_source("human")
    need = MAIN_ROUNDS_PER_MAP * len(maps)
    half = need // 2
    if len(synth_pool) < half or len(human_pool) < need - half:
        raise SessionError(
            "caption_pool_too_small",
            f"need {half} synthesized and {need - half} human captions",
        )
    synth_pick = list(rng.choice(len(synth_pool), size=half, replace=False))
    human_pick = list(rng.choice(len(human_pool), size=need - half, replace=False))
    chosen_synth = [synth_pool[i] for i in synth_pick]
    chosen_human = [human_pool[i] for i in human_pick]

    # alternate the per-map 3/2 vs 2/3 synthesized/human split by digest parity
    first_map_synth = 3 if digest[8] % 2 == 0 else 2
    per_map: list[list[CaptionEntry]] = []
    s_cursor = h_cursor = 0
    for m_index in range(len(maps)):
        n_synth = first_map_synth if m_index % 2 == 0 else MAIN_ROUNDS_PER_MAP - first_map_synth
        chunk = chosen_synth[s_cursor : s_cursor + n_synth]
        s_cursor += n_synth
        n_human = MAIN_ROUNDS_PER_MAP - len(chunk)
        chunk = chunk + chosen_human[h_cursor : h_cursor + n_human]
        h_cursor += n_human
        rng.shuffle(chunk)
        per_map.append(chunk)

    pilot_pool = captions.entries
    rounds: list[dict] = []
    index = 0
    for m_index, map_id in enumerate(maps):
        for _ in range(PILOT_ROUNDS_PER_MAP):
            entry = pilot_pool[int(rng.integers(0, len(pilot_pool)))]
            rounds.append(_round(index, map_id, entry, "pilot"))
            index += 1
        for entry in per_map[m_index]:
            rounds.append(_round(index, map_id, entry, "main"))
            index += 1
    return rounds


def _round(index: int, map_id: str, entry: CaptionEntry, kind: str) -> dict:
    return {
        "round_index": index,
        "map_id": map_id,
        "caption_id": entry.caption_id,
        "caption": entry.caption,
        "round_kind": kind,
    }
