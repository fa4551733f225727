"""HTTP chat service: sessions, photo-feature upload, events, transcripts.

Sessions live in memory; transcripts are persisted atomically (temp file +
rename) after every event batch, so a restarted service can still serve
every transcript written before the crash.  Requests within one session are
serialized by a per-session lock; model parameters are shared immutably.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .data import FormatError, parse_feature_grid
from .dialogue import Event, Photo, Session, SessionEndedError

DEFAULT_IDLE_TIMEOUT = 30 * 60.0  # 30-minute sessions


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8023
    vqg_checkpoint: str = ""
    chatbot_checkpoint: str = ""
    photos_dir: str = "photos"
    transcripts_dir: str = "transcripts"
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT

    _ENV_FIELDS = {
        "host": ("ELISA_HOST", str),
        "port": ("ELISA_PORT", int),
        "vqg_checkpoint": ("ELISA_VQG_CHECKPOINT", str),
        "chatbot_checkpoint": ("ELISA_CHATBOT_CHECKPOINT", str),
        "photos_dir": ("ELISA_PHOTOS_DIR", str),
        "transcripts_dir": ("ELISA_TRANSCRIPTS_DIR", str),
        "idle_timeout": ("ELISA_IDLE_TIMEOUT", float),
    }

    @classmethod
    def from_env(cls, **overrides):
        values = {}
        for name, (env, cast) in cls._ENV_FIELDS.items():
            if env in os.environ:
                values[name] = cast(os.environ[env])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _error(status, code, message):
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message})


class _SessionSlot:
    def __init__(self, session):
        self.session = session
        self.lock = threading.Lock()
        self.last_active = time.time()


def load_models(config: ServiceConfig):
    """Load both checkpoints, validating the kind of each slot."""
    from .dialogue import NeuralSessionModels
    from .training import load_chatbot, load_vqg
    vqg_params, vqg_vocab = load_vqg(config.vqg_checkpoint)
    cb_params, cb_vocab = load_chatbot(config.chatbot_checkpoint)
    return NeuralSessionModels(vqg_params, vqg_vocab, cb_params, cb_vocab)


def create_app(config: ServiceConfig, models=None) -> FastAPI:
    if models is None:
        models = load_models(config)
    photos_dir = Path(config.photos_dir)
    transcripts_dir = Path(config.transcripts_dir)
    photos_dir.mkdir(parents=True, exist_ok=True)
    transcripts_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="elisabot")
    slots: dict[str, _SessionSlot] = {}

    def transcript_path(sid):
        return transcripts_dir / ("%s.jsonl" % sid)

    def persist(sid, session):
        entries = [dataclasses.asdict(e) for e in session.transcript()]
        tmp = transcripts_dir / ("%s.jsonl.tmp" % sid)
        with open(tmp, "w", encoding="utf-8") as fh:
            for e in entries:
                fh.write(json.dumps(e) + "\n")
        tmp.replace(transcript_path(sid))

    def photo_path(pid):
        return photos_dir / ("%s.feat" % pid)

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        photo_ids = body.get("photos", [])
        if not photo_ids:
            return _error(400, "no-photos",
                          "a session needs at least one photo id")
        seed = int(body.get("seed", int.from_bytes(os.urandom(4), "little")))
        photos = []
        for pid in photo_ids:
            p = photo_path(pid)
            photos.append(Photo(photo_id=pid,
                                path=str(p) if p.exists() else None))
        sid = uuid.uuid4().hex
        try:
            session = Session(photos, seed=seed, models=models,
                              session_id=sid)
        except ValueError as e:
            return _error(400, "bad-request", str(e))
        slots[sid] = _SessionSlot(session)
        persist(sid, session)
        return {"session_id": sid, "seed": seed}

    @app.post("/sessions/{sid}/photos", status_code=201)
    async def upload_photo(sid: str, request: Request,
                           photo_id: str | None = None):
        slot = slots.get(sid)
        if slot is None:
            return _error(404, "unknown-session", "no session %s" % sid)
        raw = await request.body()
        try:
            parse_feature_grid(raw)
        except FormatError as e:
            return _error(415, "bad-feature-grid", str(e))
        pid = photo_id or uuid.uuid4().hex
        path = photo_path(pid)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(raw)
        tmp.replace(path)
        with slot.lock:
            session = slot.session
            known = {p.photo_id for p in session.queue} | set(session.shown)
            if session.current is not None:
                known.add(session.current.photo_id)
            for p in session.queue:
                if p.photo_id == pid:
                    p.path = str(path)
            if pid not in known:
                session.handle_event(Event("add_photo",
                                           Photo(photo_id=pid,
                                                 path=str(path))))
            persist(sid, session)
        return {"photo_id": pid}

    @app.post("/sessions/{sid}/events")
    async def post_event(sid: str, request: Request):
        slot = slots.get(sid)
        if slot is None:
            return _error(404, "unknown-session", "no session %s" % sid)
        body = await request.json()
        kind = body.get("kind")
        if kind not in ("command", "user_text"):
            return _error(400, "bad-event", "kind must be command or "
                                            "user_text")
        payload = body.get("payload", "")
        with slot.lock:
            session = slot.session
            now = time.time()
            if session.state != "Ended" and \
                    now - slot.last_active > config.idle_timeout:
                session.force_end("session timed out")
                persist(sid, session)
            slot.last_active = now
            try:
                actions = session.handle_event(
                    Event(kind=kind, payload=payload, timestamp=now))
            except SessionEndedError as e:
                return _error(409, "session-ended", str(e))
            except FileNotFoundError as e:
                return _error(409, "missing-features", str(e))
            try:
                persist(sid, session)
            except OSError as e:
                return _error(503, "storage-failure", str(e))
        return {"actions": [dataclasses.asdict(a) for a in actions]}

    @app.get("/sessions/{sid}/transcript")
    async def get_transcript(sid: str):
        slot = slots.get(sid)
        if slot is not None:
            with slot.lock:
                entries = [dataclasses.asdict(e)
                           for e in slot.session.transcript()]
            return {"session_id": sid, "entries": entries}
        path = transcript_path(sid)
        if path.exists():
            entries = [json.loads(line) for line in
                       path.read_text(encoding="utf-8").splitlines() if line]
            return {"session_id": sid, "entries": entries}
        return _error(404, "unknown-session", "no session %s" % sid)

    @app.get("/health")
    async def health():
        return {"status": "ok", "sessions": len(slots)}

    return app
