"""FastAPI application exposing the annotation task workflow."""
from __future__ import annotations

import io
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from ..errors import (
    AlreadyLabeled,
    AnnotationError,
    InvalidLabel,
    LeaseExpired,
    NoPendingTasks,
    NothingToUndo,
    TravrankError,
    UnknownImageId,
    UnknownTask,
)
from ..pairgen import read_tasks
from ..store import AnnotationStore
from ..types import DatasetManifest, load_manifest
from .schemas import LabelIn, ProgressOut, SubmitOut, TaskOut, UndoOut, task_to_schema
from .state import DEFAULT_LEASE_SECONDS, TaskPool

ERROR_STATUS = {
    NoPendingTasks: (404, "no_pending_tasks"),
    UnknownTask: (404, "unknown_task"),
    UnknownImageId: (404, "unknown_image"),
    LeaseExpired: (409, "lease_expired"),
    AlreadyLabeled: (409, "already_labeled"),
    NothingToUndo: (409, "nothing_to_undo"),
    InvalidLabel: (422, "invalid_label"),
}


def _error_response(exc: TravrankError) -> JSONResponse:
    for klass, (status, code) in ERROR_STATUS.items():
        if isinstance(exc, klass):
            return JSONResponse(status_code=status, content={"code": code, "message": str(exc)})
    if isinstance(exc, AnnotationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_annotation", "message": str(exc)}
        )
    return JSONResponse(status_code=500, content={"code": "internal_error", "message": str(exc)})


def create_app(
    manifest: DatasetManifest | str | Path,
    tasks_path: str | Path,
    annotations_path: str | Path,
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
    ui_dir: Optional[str | Path] = None,
) -> FastAPI:
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    store = AnnotationStore(annotations_path, manifest)
    pool = TaskPool(read_tasks(tasks_path), store, lease_seconds=lease_seconds)

    app = FastAPI(title="travrank annotation service")
    app.state.pool = pool
    app.state.manifest = manifest
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(TravrankError)
    async def travrank_error_handler(request: Request, exc: TravrankError) -> JSONResponse:
        return _error_response(exc)

    @app.get("/api/tasks/next", response_model=TaskOut)
    def next_task(session: str = Query(default="default")) -> TaskOut:
        return task_to_schema(pool.next_task(session))

    @app.post("/api/tasks/{task_id}/label", response_model=SubmitOut)
    def submit_label(
        task_id: str, body: LabelIn, session: str = Query(default="default")
    ) -> SubmitOut:
        pool.submit_label(task_id, body.t, session)
        return SubmitOut(task_id=task_id, status="labeled")

    @app.post("/api/tasks/{task_id}/skip", response_model=SubmitOut)
    def skip_task(task_id: str, session: str = Query(default="default")) -> SubmitOut:
        pool.skip(task_id, session)
        return SubmitOut(task_id=task_id, status="skipped")

    @app.post("/api/undo", response_model=UndoOut)
    def undo(session: str = Query(default="default")) -> UndoOut:
        task = pool.undo_last(session)
        return UndoOut(task_id=task.task_id, status=task.status)

    @app.get("/api/progress", response_model=ProgressOut)
    def progress() -> ProgressOut:
        return ProgressOut(**pool.progress())

    @app.get("/api/images/{image_id}")
    def image(image_id: str) -> Response:
        entry = manifest.entry(image_id)
        path = manifest.resolve_path(entry.path)
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            buf = io.BytesIO()
            rgb.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
