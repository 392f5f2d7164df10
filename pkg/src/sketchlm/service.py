"""Session-oriented HTTP service around the drawing loop.

One model, many sessions: each session owns a canvas; commands stream their
events back over server-sent events, one JSON object per event, with a
64-bit FNV-1a hash of the canvas after every stroke so clients can verify
their replay byte-for-byte.  A busy flag serializes commands per session.
"""

from __future__ import annotations

import io
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .canvas import canvas_hash, encode_ppm
from .codec import UnknownWord, tokenize
from .dataset import PROCEDURAL_CLASSES
from .inference import Budgets, Done, Greedy, Session, StrokeEmitted, TextToken, TopP, run_command
from .model import DecodeStream, Weights
from .codec import Vocab
from .templates import LOCATION_TAGS, TEMPLATES, TaskKind

SESSION_CAP = 64
IDLE_EVICT_SECONDS = 30 * 60


@dataclass
class SessionRecord:
    id: str
    session: Session
    created_at: float
    last_used: float
    busy: bool = False


class SessionTable:
    """The single synchronized point of mutation for session state."""

    def __init__(self, cap: int = SESSION_CAP, idle_seconds: float = IDLE_EVICT_SECONDS,
                 budgets: Budgets = Budgets()):
        self._lock = threading.Lock()
        self._by_id: dict[str, SessionRecord] = {}
        self.cap = cap
        self.idle_seconds = idle_seconds
        self.budgets = budgets

    def _evict_idle(self, now: float):
        dead = [k for k, r in self._by_id.items()
                if not r.busy and now - r.last_used > self.idle_seconds]
        for k in dead:
            del self._by_id[k]

    def create(self) -> Optional[SessionRecord]:
        now = time.monotonic()
        with self._lock:
            self._evict_idle(now)
            if len(self._by_id) >= self.cap:
                return None
            rec = SessionRecord(secrets.token_hex(8), Session(budgets=self.budgets), now, now)
            self._by_id[rec.id] = rec
            return rec

    def get(self, sid: str) -> Optional[SessionRecord]:
        with self._lock:
            rec = self._by_id.get(sid)
            if rec is not None:
                rec.last_used = time.monotonic()
            return rec

    def try_acquire(self, sid: str) -> tuple[Optional[SessionRecord], bool]:
        """(record, acquired); acquired False means the session is busy."""
        with self._lock:
            rec = self._by_id.get(sid)
            if rec is None:
                return None, False
            if rec.busy:
                return rec, False
            rec.busy = True
            rec.session.cancel_requested = False
            rec.last_used = time.monotonic()
            return rec, True

    def release(self, sid: str):
        with self._lock:
            rec = self._by_id.get(sid)
            if rec is not None:
                rec.busy = False
                rec.last_used = time.monotonic()


def event_payload(ev) -> dict:
    if isinstance(ev, StrokeEmitted):
        return {
            "type": "stroke",
            "stroke": {
                "color": list(ev.stroke.color),
                "width": ev.stroke.width,
                "points": [[p.x, p.y] for p in ev.stroke.points],
            },
            "canvasHash": f"{canvas_hash(ev.canvas_after):016x}",
        }
    if isinstance(ev, TextToken):
        return {"type": "text", "token": ev.word}
    assert isinstance(ev, Done)
    return {"type": "done", "reason": ev.reason}


def _parse_policy(spec: Optional[dict], default_seed: int = 0):
    if not spec:
        return None
    kind = spec.get("kind", "greedy")
    if kind == "top-p":
        return TopP(float(spec.get("p", 0.9)), seed=int(spec.get("seed", default_seed)))
    if kind == "greedy":
        return Greedy()
    raise ValueError(f"unknown policy kind {kind!r}")


def create_app(weights: Weights, vocab: Vocab, classes: Optional[list[str]] = None,
               static_dir: Optional[str] = None, session_cap: int = SESSION_CAP,
               budgets: Budgets = Budgets(), stream_factory=None) -> FastAPI:
    app = FastAPI(title="sketchlm studio")
    table = SessionTable(cap=session_cap, budgets=budgets)
    app.state.sessions = table
    if stream_factory is None:
        stream_factory = lambda: DecodeStream(weights)

    meta = {
        "classes": classes or list(PROCEDURAL_CLASSES),
        "tasks": [t.value for t in TaskKind],
        "templates": {t.value: dict(scenarios) for t, scenarios in TEMPLATES.items()},
        "location_tags": list(LOCATION_TAGS),
    }

    @app.post("/api/session")
    def create_session():
        rec = table.create()
        if rec is None:
            return JSONResponse({"error": "session limit reached"}, status_code=503)
        return {"id": rec.id}

    @app.get("/api/meta")
    def get_meta():
        return meta

    @app.post("/api/session/{sid}/command")
    async def post_command(sid: str, request: Request):
        body = await request.json()
        text = body.get("text", "")
        if table.get(sid) is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        try:
            policy = _parse_policy(body.get("policy"))
            tokenize(text, vocab)
        except (UnknownWord, ValueError) as e:
            return JSONResponse({"error": str(e)}, status_code=400)
        rec, acquired = table.try_acquire(sid)
        if rec is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if not acquired:
            return JSONResponse({"error": "command already in flight"}, status_code=409)

        def sse():
            try:
                for ev in run_command(rec.session, text, stream_factory(), vocab, policy=policy):
                    yield f"data: {json.dumps(event_payload(ev), separators=(',', ':'))}\n\n"
            finally:
                table.release(sid)

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.delete("/api/session/{sid}/command")
    def cancel_command(sid: str):
        rec = table.get(sid)
        if rec is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        rec.session.cancel_requested = True
        return {"cancelled": True}

    @app.get("/api/session/{sid}/canvas.ppm")
    def canvas_ppm(sid: str):
        rec = table.get(sid)
        if rec is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return Response(encode_ppm(rec.session.canvas), media_type="image/x-portable-pixmap")

    @app.get("/api/session/{sid}/canvas.png")
    def canvas_png(sid: str):
        from PIL import Image

        rec = table.get(sid)
        if rec is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        buf = io.BytesIO()
        Image.fromarray(rec.session.canvas, "RGB").save(buf, "PNG")
        return Response(buf.getvalue(), media_type="image/png")

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
