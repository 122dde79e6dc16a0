"""HTTP API over sessions, analytics, panorama jobs, and rendered artifacts.

Panorama construction runs as an asynchronous job (submit, then poll
``GET /jobs/{id}``); identical parameters against the same session content
hash to the same panorama id, so duplicate submissions resolve to the
cached build without re-stitching. Overlays are rendered on demand and
never touch the cached panorama, matching the rule that changing
visualization options must not regenerate the mosaic.

Read endpoints are safe to call concurrently; panorama builds are
serialized per session.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import analytics, reports
from .compositor import (
    OVERLAY_STYLES,
    OverlaySpec,
    Panorama,
    PanoramaParams,
    build_panorama,
    render_overlay,
    select_frame_ids,
    transform_detections,
)
from .errors import (
    MissingPanorama,
    PanoramaNotFound,
    PanovisError,
    SessionNotFound,
)
from .ingest import Session, load_session

_BAD_REQUEST = {
    "MalformedRecord",
    "InconsistentFrameDimensions",
    "NonMonotoneTimestamps",
    "EmptyFrameList",
    "InvalidRange",
    "UnsupportedDetector",
}
_NOT_FOUND = {"MissingFile", "SessionNotFound", "PanoramaNotFound", "MissingPanorama"}


@dataclass
class ServiceConfig:
    session_roots: tuple[Path, ...] | None = None  # None = no restriction
    cache_size: int = 8
    default_seed: int = 0


@dataclass
class JobRecord:
    job_id: str
    session_id: str
    panorama_id: str
    state: str  # queued | running | done | failed
    error: str | None = None
    created_at: float = field(default_factory=time.time)
    finished_at: float | None = None

    def to_json(self) -> dict:
        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "state": self.state,
            "result": self.panorama_id if self.state == "done" else None,
            "error": self.error,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
        }


@dataclass
class _CachedPanorama:
    panorama: Panorama
    session_id: str
    image_png: bytes
    report: dict
    overlays: dict[str, bytes] = field(default_factory=dict)
    distance: dict | None = None


class SessionHandle:
    """An opened session plus its serial panorama worker."""

    def __init__(self, session_id: str, session: Session):
        self.session_id = session_id
        self.session = session
        self.executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"pano-{session_id}")


def session_content_hash(session: Session) -> str:
    """Hash of the canonicalized session inputs (stable across re-opens)."""
    doc = {
        "frames": [
            [f.frame_id, f.timestamp, f.width, f.height, f.image_path] for f in session.frames
        ],
        "predictions": [
            [d.timestamp, d.label, list(d.bbox), d.confidence] for d in session.predictions
        ],
        "ground_truth": [
            [d.timestamp, d.label, list(d.bbox), d.confidence] for d in session.ground_truth
        ],
        "intrinsics": [
            session.intrinsics.fx,
            session.intrinsics.fy,
            session.intrinsics.cx,
            session.intrinsics.cy,
            session.intrinsics.skew,
        ],
        "vocabulary": sorted(session.vocabulary),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def panorama_cache_key(session_id: str, params: PanoramaParams) -> str:
    blob = json.dumps(
        {"session": session_id, "params": params.to_dict()},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class PanoramaRequest(BaseModel):
    frame_range: tuple[int, int]
    base_frame_id: int | None = None
    detector_kind: str = "orb"
    lowe_ratio: float = 0.75
    ransac_thresh: float = 3.0
    alpha: float = 1.0
    stretch_filter: bool = True
    flip_filter: bool = True
    seed: int | None = None
    sample_stride: int = 1
    max_features: int = 1500
    k_max: int = 8

    def to_params(self, default_seed: int) -> PanoramaParams:
        return PanoramaParams(
            frame_range=(self.frame_range[0], self.frame_range[1]),
            base_frame_id=self.base_frame_id,
            detector_kind=self.detector_kind,
            lowe_ratio=self.lowe_ratio,
            ransac_thresh=self.ransac_thresh,
            alpha=self.alpha,
            stretch_filter=self.stretch_filter,
            flip_filter=self.flip_filter,
            seed=self.seed if self.seed is not None else default_seed,
            sample_stride=self.sample_stride,
            max_features=self.max_features,
            k_max=self.k_max,
        )


class OpenSessionRequest(BaseModel):
    root: str


class AppState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.Lock()
        self.sessions: dict[str, SessionHandle] = {}
        self.jobs: dict[str, JobRecord] = {}
        self.panoramas: OrderedDict[str, _CachedPanorama] = OrderedDict()

    # -- sessions ----------------------------------------------------------

    def open_session(self, root: str) -> SessionHandle:
        path = Path(root).resolve()
        allow = self.config.session_roots
        if allow is not None and not any(path.is_relative_to(a.resolve()) for a in allow):
            raise SessionNotFound(f"{path} is outside the configured session roots")
        session = load_session(path)
        sid = session_content_hash(session)
        with self.lock:
            if sid not in self.sessions:
                self.sessions[sid] = SessionHandle(sid, session)
            return self.sessions[sid]

    def handle(self, session_id: str) -> SessionHandle:
        with self.lock:
            handle = self.sessions.get(session_id)
        if handle is None:
            raise SessionNotFound(f"no open session with id {session_id}")
        return handle

    # -- panoramas ---------------------------------------------------------

    def submit(self, handle: SessionHandle, params: PanoramaParams) -> JobRecord:
        params.validate()
        select_frame_ids(handle.session, params)  # surface InvalidRange synchronously
        pid = panorama_cache_key(handle.session_id, params)
        job_id = f"job-{pid}"
        with self.lock:
            cached = self.panoramas.get(pid)
            existing = self.jobs.get(job_id)
            if cached is not None:
                self.panoramas.move_to_end(pid)
                if existing is None or existing.state != "done":
                    record = JobRecord(job_id, handle.session_id, pid, "done")
                    record.finished_at = record.created_at
                    self.jobs[job_id] = record
                return self.jobs[job_id]
            if existing is not None and existing.state in ("queued", "running"):
                return existing
            record = JobRecord(job_id, handle.session_id, pid, "queued")
            self.jobs[job_id] = record
        handle.executor.submit(self._run_job, handle, params, record)
        return record

    def _run_job(self, handle: SessionHandle, params: PanoramaParams, record: JobRecord) -> None:
        with self.lock:
            record.state = "running"
        try:
            panorama = build_panorama(handle.session, params)
            entry = _CachedPanorama(
                panorama=panorama,
                session_id=handle.session_id,
                image_png=reports.encode_png(panorama.image),
                report=reports.panorama_report(panorama),
            )
            with self.lock:
                self.panoramas[record.panorama_id] = entry
                self.panoramas.move_to_end(record.panorama_id)
                while len(self.panoramas) > self.config.cache_size:
                    self.panoramas.popitem(last=False)
                record.state = "done"
                record.finished_at = time.time()
        except Exception as exc:  # job failures surface via the job record
            with self.lock:
                record.state = "failed"
                record.error = f"{type(exc).__name__}: {exc}"
                record.finished_at = time.time()

    def job(self, job_id: str) -> JobRecord:
        with self.lock:
            record = self.jobs.get(job_id)
        if record is None:
            raise PanoramaNotFound(f"unknown job {job_id}")
        return record

    def panorama(self, panorama_id: str) -> _CachedPanorama:
        with self.lock:
            entry = self.panoramas.get(panorama_id)
            if entry is not None:
                self.panoramas.move_to_end(panorama_id)
        if entry is None:
            raise PanoramaNotFound(f"no cached panorama {panorama_id}")
        return entry


def _overlay_cache_key(spec: OverlaySpec) -> str:
    return json.dumps(
        {
            "style": spec.style,
            "min_confidence": spec.min_confidence,
            "labels": sorted(spec.label_filter) if spec.label_filter is not None else None,
            "highlight": spec.highlighted_frame,
        },
        sort_keys=True,
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    state = AppState(config)
    app = FastAPI(title="panovis", version="0.1.0")
    app.state.panovis = state

    @app.exception_handler(PanovisError)
    async def _panovis_error(_request: Request, exc: PanovisError) -> JSONResponse:
        if exc.code in _NOT_FOUND:
            status = 404
        elif exc.code in _BAD_REQUEST:
            status = 400
        else:
            status = 500
        return JSONResponse(
            status_code=status, content={"error": {"code": exc.code, "message": str(exc)}}
        )

    @app.exception_handler(ValueError)
    async def _value_error(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"error": {"code": "ValidationError", "message": str(exc)}}
        )

    @app.post("/sessions")
    def open_session(body: OpenSessionRequest) -> dict:
        handle = state.open_session(body.root)
        return {"session_id": handle.session_id, "frames": len(handle.session.frames)}

    @app.get("/sessions/{session_id}/meta")
    def session_meta(session_id: str) -> dict:
        session = state.handle(session_id).session
        return {
            "session_id": session_id,
            "frames": len(session.frames),
            "frame_ids": [f.frame_id for f in session.frames],
            "width": session.frames[0].width,
            "height": session.frames[0].height,
            "time_range": [session.frames[0].timestamp, session.frames[-1].timestamp],
            "predictions": len(session.predictions),
            "ground_truth": len(session.ground_truth),
            "vocabulary": sorted(session.vocabulary),
        }

    @app.get("/sessions/{session_id}/frames/{frame_id}")
    def frame_image(session_id: str, frame_id: int) -> Response:
        session = state.handle(session_id).session
        try:
            image = session.load_image(frame_id)
        except KeyError:
            raise PanoramaNotFound(f"frame {frame_id} not in session") from None
        rgba = reports.encode_png(image)
        return Response(content=rgba, media_type="image/png")

    @app.get("/sessions/{session_id}/timeline/summary")
    def timeline_summary(session_id: str, metric: str = "confidence") -> dict:
        session = state.handle(session_id).session
        matrix = analytics.summary_matrix(session, metric)
        return reports.matrix_json(matrix)

    @app.get("/sessions/{session_id}/timeline/classification")
    def timeline_classification(session_id: str, iou_threshold: float = 0.5) -> list[dict]:
        session = state.handle(session_id).session
        return [
            {"frame_id": c.frame_id, "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
            for c in analytics.classify_session(session, iou_threshold)
        ]

    @app.get("/sessions/{session_id}/timeline/distance")
    def timeline_distance(session_id: str, panorama_id: str | None = None) -> dict:
        state.handle(session_id)
        if panorama_id is None:
            raise MissingPanorama("distance view requires a built panorama (pass panorama_id)")
        return panorama_distance(panorama_id)

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, missing: int = 15) -> list[dict]:
        session = state.handle(session_id).session
        return [
            {"kind": e.kind, "frame_id": e.frame_id, "label": e.label, "detail": e.detail}
            for e in analytics.poi_events(session, missing)
        ]

    @app.post("/sessions/{session_id}/panoramas")
    def submit_panorama(session_id: str, body: PanoramaRequest) -> dict:
        handle = state.handle(session_id)
        record = state.submit(handle, body.to_params(config.default_seed))
        return {"job_id": record.job_id, "state": record.state}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        return state.job(job_id).to_json()

    @app.get("/panoramas/{panorama_id}/image")
    def panorama_image(panorama_id: str) -> Response:
        entry = state.panorama(panorama_id)
        return Response(content=entry.image_png, media_type="image/png")

    @app.get("/panoramas/{panorama_id}/report")
    def panorama_report(panorama_id: str) -> dict:
        return state.panorama(panorama_id).report

    @app.get("/panoramas/{panorama_id}/overlay")
    def panorama_overlay(
        panorama_id: str,
        style: str = "boxes",
        min_conf: float = 0.0,
        labels: str | None = None,
        highlight: int | None = None,
    ) -> Response:
        if style not in OVERLAY_STYLES:
            raise ValueError(f"style must be one of {OVERLAY_STYLES}")
        entry = state.panorama(panorama_id)
        spec = OverlaySpec(
            style=style,
            min_confidence=min_conf,
            label_filter=frozenset(labels.split(",")) if labels else None,
            highlighted_frame=highlight,
        )
        spec.validate()
        key = _overlay_cache_key(spec)
        with state.lock:
            png = entry.overlays.get(key)
        if png is None:
            handle = state.handle(entry.session_id)
            transformed = transform_detections(entry.panorama, handle.session.predictions)
            raster = render_overlay(entry.panorama, transformed, spec)
            png = reports.encode_png(raster)
            with state.lock:
                entry.overlays[key] = png
        return Response(content=png, media_type="image/png")

    @app.get("/panoramas/{panorama_id}/distance")
    def panorama_distance(panorama_id: str) -> dict:
        entry = state.panorama(panorama_id)
        with state.lock:
            cached = entry.distance
        if cached is None:
            handle = state.handle(entry.session_id)
            series = reports.panorama_distance_series(entry.panorama, handle.session)
            cached = {"panorama_id": panorama_id, "series": reports.series_json(series)}
            with state.lock:
                entry.distance = cached
        return cached

    return app
