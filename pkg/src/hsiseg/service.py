"""HTTP session service for the interactive click loop.

Sessions live in memory and are evicted after an idle period. Within one
session click mutations are serialized behind a lock while map reads work on
immutable snapshots, so concurrent requests always observe some prefix of the
click history. Responses are cached per (click-state, method, threshold) and
all computation is deterministic, so repeated identical requests return
byte-identical payloads.

Maps travel to the UI as 16-bit grayscale PNGs (value = round(v * 65535));
thresholding compares those quantized values against floor(t * 65535 + 0.5)
so a client binarizing the PNG itself gets pixel-identical masks. The raw
float32 map is available at ``map.raw`` for scripting.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from .errors import HsisegError
from .fileio import load_cube, load_probability_map
from .fusion import FusionModel
from .protocol import FUSED_SCF_METHOD, compute_method_map
from .rasters import Click, ClickSet, HyperCube, RgbImage, SimilarityMap, adaptive_selection, pseudo_rgb
from .synth import SceneSpec, generate_scene

DEFAULT_IDLE_SECONDS = 30 * 60
BASE_METHODS = ("sa", "sa_eq", "pcc", "pcc_eq", "rgb", "intersection")


def quantize_threshold(threshold: float) -> int:
    """Map a [0,1] threshold onto 16-bit levels, rounding half up (matches the UI)."""
    return int(np.floor(threshold * 65535.0 + 0.5))


def _png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _smap_bytes(m: SimilarityMap) -> bytes:
    header = b"SMAP" + struct.pack("<III", m.height, m.width, 0)
    return header + m.data.astype("<f4").tobytes()


@dataclass
class Session:
    id: str
    cube: HyperCube
    rgb_image: RgbImage
    external_map: SimilarityMap | None = None
    clicks: tuple[Click, ...] = ()
    last_access: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    map_cache: dict = field(default_factory=dict, repr=False)
    payload_cache: dict = field(default_factory=dict, repr=False)

    def state_hash(self) -> str:
        payload = json.dumps([(c.row, c.col, c.positive) for c in self.clicks])
        return hashlib.sha1(payload.encode()).hexdigest()


class SessionStore:
    def __init__(self, idle_seconds: float = DEFAULT_IDLE_SECONDS, time_fn=time.monotonic):
        self._sessions: dict[str, Session] = {}
        self._idle_seconds = idle_seconds
        self._time_fn = time_fn
        self._lock = threading.Lock()

    def _evict_stale(self) -> None:
        now = self._time_fn()
        stale = [sid for sid, s in self._sessions.items()
                 if now - s.last_access > self._idle_seconds]
        for sid in stale:
            del self._sessions[sid]

    def add(self, session: Session) -> None:
        with self._lock:
            self._evict_stale()
            session.last_access = self._time_fn()
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            self._evict_stale()
            session = self._sessions.get(session_id)
            if session is None:
                raise HTTPException(status_code=404, detail=f"no session {session_id}")
            session.last_access = self._time_fn()
            return session


class CreateSessionBody(BaseModel):
    cube_path: str | None = None
    scene_spec: dict | None = None
    rgb_map_path: str | None = None


class ClickBody(BaseModel):
    row: int
    col: int
    polarity: Literal["positive", "negative"] = "positive"


def create_app(
    model: FusionModel | None = None,
    standin_sigma: float = 25.0,
    idle_seconds: float = DEFAULT_IDLE_SECONDS,
    time_fn=time.monotonic,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="hsiseg session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(idle_seconds=idle_seconds, time_fn=time_fn)
    app.state.store = store
    methods = BASE_METHODS + (("learned",) if model is not None else ())

    @app.exception_handler(HTTPException)
    async def http_error(_request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code,
                            content={"code": exc.status_code, "message": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": 422, "message": str(exc.errors())})

    def metadata(session: Session) -> dict:
        wl = session.cube.wavelengths
        return {
            "id": session.id,
            "height": session.cube.height,
            "width": session.cube.width,
            "bands": session.cube.bands,
            "wavelength_min": float(wl[0]),
            "wavelength_max": float(wl[-1]),
            "methods": list(methods),
            "clicks": len(session.clicks),
            "state_hash": session.state_hash(),
        }

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if (body.cube_path is None) == (body.scene_spec is None):
            raise HTTPException(422, "provide exactly one of cube_path or scene_spec")
        try:
            if body.cube_path is not None:
                path = Path(body.cube_path)
                if not path.exists():
                    raise HTTPException(404, f"no such cube: {path}")
                cube = load_cube(path)
            else:
                cube, _labels = generate_scene(SceneSpec.from_json(json.dumps(body.scene_spec)))
            external = None
            if body.rgb_map_path is not None:
                rgb_path = Path(body.rgb_map_path)
                if not rgb_path.exists():
                    raise HTTPException(404, f"no such map: {rgb_path}")
                external = load_probability_map(rgb_path)
        except HsisegError as exc:
            raise HTTPException(422, str(exc)) from exc
        session = Session(
            id=uuid.uuid4().hex,
            cube=cube,
            rgb_image=pseudo_rgb(cube, adaptive_selection(cube)),
            external_map=external,
        )
        store.add(session)
        return metadata(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return metadata(store.get(session_id))

    @app.get("/sessions/{session_id}/rgb")
    def get_rgb(session_id: str):
        session = store.get(session_id)
        key = ("rgb-image",)
        if key not in session.payload_cache:
            session.payload_cache[key] = _png_bytes(Image.fromarray(session.rgb_image.data))
        return Response(content=session.payload_cache[key], media_type="image/png")

    @app.post("/sessions/{session_id}/clicks")
    def add_click(session_id: str, body: ClickBody):
        session = store.get(session_id)
        with session.lock:
            if not (0 <= body.row < session.cube.height and 0 <= body.col < session.cube.width):
                raise HTTPException(422, f"click ({body.row}, {body.col}) is out of bounds")
            if any((c.row, c.col) == (body.row, body.col) for c in session.clicks):
                raise HTTPException(409, f"duplicate click at ({body.row}, {body.col})")
            session.clicks = session.clicks + (
                Click(body.row, body.col, body.polarity == "positive"),
            )
            session.map_cache.clear()
            session.payload_cache.clear()
            return {"clicks": len(session.clicks), "state_hash": session.state_hash()}

    @app.delete("/sessions/{session_id}/clicks/last")
    def undo_click(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if not session.clicks:
                raise HTTPException(409, "click history is empty")
            session.clicks = session.clicks[:-1]
            session.map_cache.clear()
            session.payload_cache.clear()
            return {"clicks": len(session.clicks), "state_hash": session.state_hash()}

    def compute_map(session: Session, method: str) -> SimilarityMap:
        if method not in methods:
            raise HTTPException(404, f"unknown method {method!r}")
        clicks = ClickSet(session.clicks)  # immutable snapshot
        click_free = method == "rgb" and session.external_map is not None
        if not clicks.positives() and not click_free:
            raise HTTPException(409, f"method {method!r} needs at least one positive click")
        key = (session.state_hash(), method)
        cached = session.map_cache.get(key)
        if cached is not None:
            return cached
        try:
            result = compute_method_map(
                method,
                session.cube,
                session.rgb_image,
                clicks,
                external_map=session.external_map,
                model=model,
                standin_sigma=standin_sigma,
            )
        except HsisegError as exc:
            raise HTTPException(422, str(exc)) from exc
        session.map_cache[key] = result
        return result

    @app.get("/sessions/{session_id}/map")
    def get_map(session_id: str, method: str, threshold: float | None = None):
        session = store.get(session_id)
        if threshold is not None and not (0.0 <= threshold <= 1.0):
            raise HTTPException(422, "threshold must lie in [0, 1]")
        m = compute_map(session, method)
        key = (session.state_hash(), method, threshold)
        payload = session.payload_cache.get(key)
        if payload is None:
            quantized = np.rint(m.data * 65535.0).astype(np.uint16)
            if threshold is None:
                payload = _png_bytes(Image.fromarray(quantized))
            else:
                mask = quantized >= quantize_threshold(threshold)
                payload = _png_bytes(Image.fromarray(mask).convert("1"))
            session.payload_cache[key] = payload
        headers = {
            "X-Map-Min": repr(float(m.data.min())),
            "X-Map-Max": repr(float(m.data.max())),
            "X-Map-Mean": repr(float(m.data.mean())),
            "X-State-Hash": session.state_hash(),
        }
        return Response(content=payload, media_type="image/png", headers=headers)

    @app.get("/sessions/{session_id}/map.raw")
    def get_map_raw(session_id: str, method: str):
        session = store.get(session_id)
        m = compute_map(session, method)
        return Response(content=_smap_bytes(m), media_type="application/octet-stream")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
