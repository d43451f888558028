"""Session-based HTTP API over the engine.

One session owns a loaded scene, the active 2D mask, the active 3D
selection, its track jobs and a bounded undo history. Requests within a
session are serialized; distinct sessions run concurrently. Binary image
payloads are PNG; everything else is JSON.
"""

from __future__ import annotations

import base64
import io
import json
import queue
import threading
import uuid
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from PIL import Image
from pydantic import BaseModel

from .autoseg import AutoSegRun, ReferenceMask, rerun_after_correction, run_auto_segmentation
from .cameras import Camera
from .errors import EngineError
from .evalkit import make_provider_factory
from .orient import AxisMapping, orient_scene
from .providers import mask_from_png_bytes
from .rasterize import forward
from .scene import GaussianScene, load_scene
from .selection import (
    Mask2D,
    Selection3D,
    SelectMode,
    box_mask,
    combine_mask2d,
    combine_selection3d,
    decode_selection,
    export_selection,
    paint_mask,
)

UNDO_DEPTH = 32
SELECTION_TINT = np.array([1.0, 0.45, 0.05])   # 3D selection overlay hue
TRACKED_TINT = np.array([0.15, 0.9, 0.4])      # tracked-mask overlay hue


@dataclass
class JobRecord:
    run: AutoSegRun


@dataclass
class Session:
    id: str
    scene: GaussianScene
    active_mask: Mask2D | None = None
    active_selection: Selection3D = None  # type: ignore[assignment]
    jobs: dict[str, JobRecord] = field(default_factory=dict)
    undo_stack: deque = field(default_factory=lambda: deque(maxlen=UNDO_DEPTH))
    redo_stack: list = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock)

    def __post_init__(self):
        if self.active_selection is None:
            self.active_selection = Selection3D.empty(self.scene.count)

    def snapshot(self):
        mask = None
        if self.active_mask is not None:
            mask = Mask2D(self.active_mask.camera, self.active_mask.bits.copy(),
                          self.active_mask.occlusion_free)
        return (mask, Selection3D(self.active_selection.bits.copy()))

    def push_undo(self):
        self.undo_stack.append(self.snapshot())
        self.redo_stack.clear()

    def stats(self) -> dict:
        return {"count": self.active_selection.popcount()}


class CreateSessionBody(BaseModel):
    scene_path: str


class RenderBody(BaseModel):
    camera: dict
    channels: list[str] = ["rgb"]


class PaintBody(BaseModel):
    camera: dict
    stroke: list[list[float]]
    radius: float = 4.0
    value: bool = True
    mode: str = "N"
    occlusion_free: bool | None = None


class BoxBody(BaseModel):
    camera: dict
    rect: list[float]
    mode: str = "N"
    occlusion_free: bool | None = None


class ProjectBody(BaseModel):
    kind: str
    tau_d: float | None = None
    absolute: bool = False
    mode: str = "N"


class AutosegBody(BaseModel):
    view_source: str = "turnaround"
    m: int = 50
    presegment: bool = True
    provider: str = "geometric"
    mode: str = "N"
    stream: bool = False


class CorrectionBody(BaseModel):
    position: int | None = None
    camera: dict | None = None
    mask_png_base64: str


class CombineBody(BaseModel):
    mode: str
    source: str
    job_id: str | None = None
    gsel_base64: str | None = None


class OrientBody(BaseModel):
    mapping: str


class ExportBody(BaseModel):
    path: str
    invert: bool = False


def _png_response(rgb: np.ndarray, alpha: np.ndarray | None = None) -> Response:
    data = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    if alpha is not None:
        a = np.clip(np.round(alpha * 255.0), 0, 255).astype(np.uint8)
        data = np.dstack([data, a])
        img = Image.fromarray(data, mode="RGBA")
    else:
        img = Image.fromarray(data, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


def create_app(max_sessions: int = 32, providers: dict[str, str] | None = None) -> FastAPI:
    app = FastAPI(title="splatselect", version="0.1.0")
    # the browser client is served separately; this is a local tool
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    registry = {"geometric": "geometric"}
    registry.update(providers or {})

    @app.exception_handler(RequestValidationError)
    def bad_body(request: Request, exc: RequestValidationError):
        fields = ", ".join(
            ".".join(str(p) for p in err.get("loc", ())) for err in exc.errors()
        )
        return JSONResponse(status_code=400, content={"detail": f"malformed body: {fields}"})

    @app.exception_handler(EngineError)
    def engine_error(request: Request, exc: EngineError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    def value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    class NotFound(Exception):
        pass

    def get_session(sid: str) -> Session:
        session = sessions.get(sid)
        if session is None:
            raise NotFound(f"session {sid}")
        return session

    @app.exception_handler(NotFound)
    def not_found(request: Request, exc: NotFound):
        return JSONResponse(status_code=404, content={"detail": f"unknown {exc}"})

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        if len(sessions) >= max_sessions:
            return JSONResponse(status_code=503, content={"detail": "session limit reached"})
        scene = load_scene(body.scene_path)
        sid = uuid.uuid4().hex[:12]
        sessions[sid] = Session(id=sid, scene=scene)
        return {"session_id": sid, "gaussian_count": scene.count, "sh_degree": scene.sh_degree}

    @app.delete("/sessions/{sid}")
    def close_session(sid: str):
        get_session(sid)
        del sessions[sid]
        return {"closed": sid}

    @app.post("/sessions/{sid}/render")
    def render_view(sid: str, body: RenderBody):
        session = get_session(sid)
        with session.lock:
            cam = Camera.from_json(body.camera)
            out = forward(session.scene, cam)
            base = next((c for c in body.channels if c in ("rgb", "alpha", "depth")), "rgb")
            if base == "alpha":
                rgb = np.repeat(out.rgba[:, :, 3:4], 3, axis=2)
            elif base == "depth":
                d = out.depth
                top = d.max()
                rgb = np.repeat((d / top if top > 0 else d)[:, :, None], 3, axis=2)
            else:
                rgb = out.rgba[:, :, :3].copy()
            if "selection_overlay" in body.channels:
                wsel = out.contrib_weights.feature_image(
                    session.active_selection.bits.astype(np.float64)
                )[:, :, 0]
                blend = 0.65 * np.clip(wsel, 0.0, 1.0)[:, :, None]
                rgb = rgb * (1.0 - blend) + SELECTION_TINT * blend
            return _png_response(rgb, out.rgba[:, :, 3])

    def _apply_mask(session: Session, incoming: Mask2D, mode: str, occlusion_free: bool | None):
        mode = SelectMode.parse(mode)
        session.push_undo()
        if session.active_mask is None or not session.active_mask.camera.same_view(incoming.camera):
            # switching views starts a fresh mask regardless of mode
            current = Mask2D.empty(incoming.camera)
        else:
            current = session.active_mask
        merged = combine_mask2d(current, incoming, mode)
        if occlusion_free is not None:
            merged.occlusion_free = occlusion_free
        elif session.active_mask is not None and mode is not SelectMode.N:
            merged.occlusion_free = current.occlusion_free
        session.active_mask = merged
        return {"mask_pixels": merged.popcount(), "occlusion_free": merged.occlusion_free}

    @app.post("/sessions/{sid}/mask/paint")
    def mask_paint(sid: str, body: PaintBody):
        session = get_session(sid)
        with session.lock:
            cam = Camera.from_json(body.camera)
            stroke_mask = paint_mask(
                Mask2D.empty(cam), [tuple(p) for p in body.stroke], body.radius, body.value
            )
            if not body.value:
                # erasing applies subtract semantics against the active mask
                return _apply_mask(session, stroke_mask, "S", body.occlusion_free)
            return _apply_mask(session, stroke_mask, body.mode, body.occlusion_free)

    @app.post("/sessions/{sid}/mask/box")
    def mask_box(sid: str, body: BoxBody):
        session = get_session(sid)
        with session.lock:
            cam = Camera.from_json(body.camera)
            return _apply_mask(session, box_mask(cam, tuple(body.rect)), body.mode, body.occlusion_free)

    @app.put("/sessions/{sid}/mask")
    async def mask_upload(
        sid: str,
        request: Request,
        mode: str = Query("N"),
        occlusion_free: bool = Query(False),
        camera: str = Query(...),
    ):
        session = get_session(sid)
        data = await request.body()
        with session.lock:
            cam = Camera.from_json(json.loads(camera))
            incoming = mask_from_png_bytes(data, cam, occlusion_free)
            return _apply_mask(session, incoming, mode, occlusion_free)

    @app.post("/sessions/{sid}/project")
    def project(sid: str, body: ProjectBody):
        session = get_session(sid)
        with session.lock:
            if session.active_mask is None:
                raise EngineError("no active 2D mask to project")
            if body.kind == "frustum":
                from .selection import frustum_project

                sel = frustum_project(session.scene, session.active_mask)
            elif body.kind == "depth":
                from .selection import depth_project

                sel = depth_project(
                    session.scene, session.active_mask,
                    tau_d=body.tau_d if body.tau_d is not None else 0.01,
                    absolute=body.absolute,
                )
            else:
                raise ValueError(f"unknown projection kind {body.kind!r}")
            session.push_undo()
            session.active_selection = combine_selection3d(
                session.active_selection, sel, body.mode
            )
            return session.stats()

    def _run_autoseg(session: Session, body: AutosegBody, on_view=None) -> dict:
        if session.active_mask is None:
            raise EngineError("no active 2D mask; paint or upload one first")
        spec = registry.get(body.provider)
        if spec is None:
            raise ValueError(f"unknown provider {body.provider!r}")
        factory = make_provider_factory(spec)
        training_cameras = None
        view_source = body.view_source
        if view_source.startswith("training:"):
            from .cameras import load_cameras

            training_cameras = load_cameras(view_source.split(":", 1)[1])
            view_source = "training_subset"
        run = run_auto_segmentation(
            session.scene,
            [ReferenceMask(session.active_mask)],
            view_source=view_source,
            m=body.m,
            provider=factory,
            presegment=body.presegment,
            training_cameras=training_cameras,
            on_view=on_view,
        )
        job_id = uuid.uuid4().hex[:8]
        session.jobs[job_id] = JobRecord(run=run)
        session.push_undo()
        session.active_selection = combine_selection3d(
            session.active_selection, run.result.selection, body.mode
        )
        return {"job_id": job_id, "elapsed": run.result.elapsed, **session.stats()}

    @app.post("/sessions/{sid}/autoseg")
    def autoseg(sid: str, body: AutosegBody):
        session = get_session(sid)
        if not body.stream:
            with session.lock:
                return _run_autoseg(session, body)

        # chunked progress: one JSON line per aggregated view, result last
        events: queue.Queue = queue.Queue()

        def work():
            try:
                with session.lock:
                    result = _run_autoseg(
                        session, body,
                        on_view=lambda i, loss: events.put({"view": i, "loss": loss}),
                    )
                events.put(result)
            except Exception as exc:  # surfaced in-band; the stream already started
                events.put({"error": str(exc)})
            events.put(None)

        threading.Thread(target=work, daemon=True).start()

        def gen():
            while True:
                item = events.get()
                if item is None:
                    break
                yield json.dumps(item) + "\n"

        return StreamingResponse(gen(), media_type="application/x-ndjson")

    @app.get("/sessions/{sid}/jobs/{job_id}/frames/{k}")
    def job_frame(sid: str, job_id: str, k: int):
        session = get_session(sid)
        with session.lock:
            record = session.jobs.get(job_id)
            if record is None:
                raise NotFound(f"job {job_id}")
            job = record.run.job
            if not 0 <= k < len(job.frames):
                raise NotFound(f"frame {k}")
            rgb = job.frames[k][:, :, :3].copy()
            tracked = job.tracked[k]
            if tracked is not None:
                blend = 0.5 * tracked.bits[:, :, None]
                rgb = rgb * (1.0 - blend) + TRACKED_TINT * blend
            return _png_response(rgb)

    @app.get("/sessions/{sid}/jobs/{job_id}")
    def job_info(sid: str, job_id: str):
        session = get_session(sid)
        with session.lock:
            record = session.jobs.get(job_id)
            if record is None:
                raise NotFound(f"job {job_id}")
            job = record.run.job
            return {
                "frames": len(job.frames),
                "provider": job.provider_id,
                "injections": {
                    str(pos): len(entries) for pos, entries in job.injections.items()
                },
                "losses": record.run.result.loss_trace,
            }

    @app.post("/sessions/{sid}/jobs/{job_id}/corrections")
    def correct(sid: str, job_id: str, body: CorrectionBody):
        session = get_session(sid)
        with session.lock:
            record = session.jobs.get(job_id)
            if record is None:
                raise NotFound(f"job {job_id}")
            job = record.run.job
            if body.position is not None:
                if not 0 <= body.position < len(job.sequence):
                    raise ValueError(f"position {body.position} out of range")
                cam = job.sequence.cameras[body.position]
            elif body.camera is not None:
                cam = Camera.from_json(body.camera)
            else:
                raise ValueError("correction needs a position or a camera")
            mask = mask_from_png_bytes(base64.b64decode(body.mask_png_base64), cam)
            record.run = rerun_after_correction(record.run, ReferenceMask(mask))
            session.push_undo()
            session.active_selection = record.run.result.selection
            return {"job_id": job_id, "elapsed": record.run.result.elapsed, **session.stats()}

    @app.post("/sessions/{sid}/selection/combine")
    def combine(sid: str, body: CombineBody):
        session = get_session(sid)
        with session.lock:
            if body.source == "job":
                record = session.jobs.get(body.job_id or "")
                if record is None:
                    raise NotFound(f"job {body.job_id}")
                incoming = record.run.result.selection
            elif body.source == "upload":
                if not body.gsel_base64:
                    raise ValueError("upload source needs gsel_base64")
                incoming = decode_selection(base64.b64decode(body.gsel_base64))
            else:
                raise ValueError(f"unknown selection source {body.source!r}")
            session.push_undo()
            session.active_selection = combine_selection3d(
                session.active_selection, incoming, body.mode
            )
            return session.stats()

    @app.post("/sessions/{sid}/orient")
    def orient(sid: str, body: OrientBody):
        session = get_session(sid)
        with session.lock:
            mapping = AxisMapping.parse(body.mapping)
            session.push_undo()
            session.scene = orient_scene(session.scene, session.active_selection, mapping)
            return session.stats()

    @app.post("/sessions/{sid}/export")
    def export(sid: str, body: ExportBody):
        session = get_session(sid)
        with session.lock:
            written = export_selection(
                session.scene, session.active_selection, body.path, invert=body.invert
            )
            return {"written": written}

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        session = get_session(sid)
        with session.lock:
            if not session.undo_stack:
                raise EngineError("nothing to undo")
            session.redo_stack.append(session.snapshot())
            session.active_mask, session.active_selection = session.undo_stack.pop()
            return session.stats()

    @app.post("/sessions/{sid}/redo")
    def redo(sid: str):
        session = get_session(sid)
        with session.lock:
            if not session.redo_stack:
                raise EngineError("nothing to redo")
            session.undo_stack.append(session.snapshot())
            session.active_mask, session.active_selection = session.redo_stack.pop()
            return session.stats()

    @app.get("/sessions/{sid}")
    def info(sid: str):
        session = get_session(sid)
        with session.lock:
            return {
                "session_id": session.id,
                "gaussian_count": session.scene.count,
                "selection_count": session.active_selection.popcount(),
                "mask_pixels": session.active_mask.popcount() if session.active_mask else 0,
                "jobs": list(session.jobs),
                "undo_depth": len(session.undo_stack),
                "redo_depth": len(session.redo_stack),
            }

    return app
