"""HTTP API over the session store, plus static hosting of the built UI."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..geometry import dist
from ..translate import trajectory_to_json
from .sessions import CaptionSet, SessionError, SessionEvent, SessionStore, assign_rounds


class CreateSessionBody(BaseModel):
    participant_id: str
    map_id: str
    caption_id: str
    round_kind: str = "main"


class EventBody(BaseModel):
    kind: str
    t: int
    position: list[float] | None = None
    item_id: str | None = None


class EventBatchBody(BaseModel):
    events: list[EventBody] = Field(default_factory=list)


def _http_error(exc: SessionError) -> HTTPException:
    status = {
        "unknown_map": 404,
        "unknown_caption": 404,
        "unknown_session": 404,
        "active_session_exists": 409,
        "not_active": 409,
        "not_at_cashier": 400,
        "empty_log": 400,
        "bad_round_kind": 400,
        "caption_pool_too_small": 400,
    }.get(exc.code, 400)
    return HTTPException(status_code=status, detail={"code": exc.code, "message": exc.message})


def _session_view(store: SessionStore, session_id: str) -> dict:
    session = store.sessions[session_id]
    smap = store.maps[session.map_id]
    nearest = None
    if smap.items:
        item = smap.nearest_item(session.position)
        nearest = {
            "item_id": item.id,
            "name": item.name,
            "category": item.category,
            "attributes": dict(item.attributes),
            "adjacent": dist(item.position, session.position) <= smap.reach_distance,
        }
    return {
        "session_id": session.session_id,
        "participant_id": session.participant_id,
        "map_id": session.map_id,
        "caption_id": session.caption_id,
        "round_kind": session.round_kind,
        "state": session.state,
        "position": list(session.position),
        "cart": list(session.cart),
        "event_count": len(session.events),
        "nearest_item": nearest,
    }


def create_app(
    store: SessionStore,
    captions: CaptionSet,
    map_labels: Mapping[str, str],
    ui_dir: str | None = None,
    seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="shoptraj collection service")
    caption_sources = {e.caption_id: e.source for e in captions.entries}
    caption_ids = set(caption_sources)

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, exc: SessionError):  # noqa: ARG001
        http = _http_error(exc)
        return JSONResponse(status_code=http.status_code, content={"error": http.detail})

    @app.get("/maps")
    def list_maps() -> list[dict]:
        return [
            {"map_id": map_id, "label": map_labels.get(map_id, "seen")}
            for map_id in sorted(store.maps)
        ]

    @app.get("/maps/{map_id}")
    def get_map(map_id: str) -> dict:
        smap = store.maps.get(map_id)
        if smap is None:
            raise _http_error(SessionError("unknown_map", f"no map '{map_id}'"))
        doc = smap.serialize()
        doc["grid_step"] = store.grid_step
        doc["label"] = map_labels.get(map_id, "seen")
        return doc

    @app.get("/assignments/{participant_id}")
    def get_assignment(participant_id: str) -> dict:
        rounds = assign_rounds(participant_id, captions, sorted(store.maps), seed=seed)
        return {"participant_id": participant_id, "rounds": rounds}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        session = store.create_session(
            participant_id=body.participant_id,
            map_id=body.map_id,
            caption_id=body.caption_id,
            round_kind=body.round_kind,
            caption_ids=caption_ids,
        )
        return _session_view(store, session.session_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        if session_id not in store.sessions:
            raise _http_error(SessionError("unknown_session", f"no session '{session_id}'"))
        return _session_view(store, session_id)

    @app.post("/sessions/{session_id}/events")
    def post_events(session_id: str, body: EventBatchBody) -> dict:
        events = [
            SessionEvent(
                kind=ev.kind,
                t=ev.t,
                position=tuple(ev.position) if ev.position is not None else None,
                item_id=ev.item_id,
            )
            for ev in body.events
        ]
        results = store.record_events(session_id, events)
        view = _session_view(store, session_id)
        view["results"] = [
            {"index": r.index, "accepted": r.accepted, "reason": r.reason} for r in results
        ]
        return view

    @app.post("/sessions/{session_id}/complete")
    def complete(session_id: str) -> dict:
        traj = store.complete_session(session_id)
        view = _session_view(store, session_id)
        view["trajectory"] = json.loads(trajectory_to_json(traj))
        return view

    @app.get("/export")
    def export(map_label: str | None = None, caption_source: str | None = None) -> dict:
        trajs, labels, strata = store.export_sessions(
            map_labels, caption_sources, map_label=map_label, caption_source=caption_source
        )
        records = []
        for traj, label in zip(trajs, labels):
            doc = json.loads(trajectory_to_json(traj))
            doc.update(label)
            records.append(doc)
        counts_by_label: dict[str, int] = {}
        for label in labels:
            key = label["map_label"]
            counts_by_label[key] = counts_by_label.get(key, 0) + 1
        return {
            "count": len(records),
            "counts_by_map_label": counts_by_label,
            "strata": strata,
            "records": records,
        }

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/app", StaticFiles(directory=ui_dir, html=True), name="app")

    return app
