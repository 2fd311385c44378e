"""HTTP API for the annotation UI, plus static asset serving.

Three endpoints, whose payloads mirror the JSONL store schemas exactly
(the served task object is the stored task record):

* ``GET /api/tasks/next?annotator_id=X`` — next unanswered task for X
* ``POST /api/responses`` — submit a response record
* ``GET /api/progress`` — counts and inter-annotator agreement so far

The store is single-writer append-only; concurrent clients are safe.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import (
    AnnotationStore,
    AnnotationStoreError,
    AnnotatorResponse,
    iaa_report,
)


class ResponseIn(BaseModel):
    task_id: str
    annotator_id: str
    selected: list[str] = []
    none: bool = False


def _progress_payload(store: AnnotationStore) -> dict:
    progress = store.progress()
    tasks = store.tasks()
    scorable = [t for t in tasks if len(store.latest(t.task_id)) == 2]
    iaa = None
    if scorable:
        report = iaa_report(store, scorable)
        iaa = report.to_dict()
    progress["iaa"] = iaa
    return progress


def _next_payload(store: AnnotationStore, annotator_id: str) -> dict:
    task = store.next_task_for(annotator_id)
    return {
        "done": task is None,
        "task": None if task is None else task.to_record(),
        "progress": _progress_payload(store),
    }


def create_app(store: AnnotationStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="argaspect annotation API")

    @app.get("/api/tasks/next")
    def next_task(annotator_id: str = Query(min_length=1)):
        return JSONResponse(_next_payload(store, annotator_id))

    @app.post("/api/responses")
    def submit_response(body: ResponseIn):
        try:
            response = AnnotatorResponse(
                task_id=body.task_id,
                annotator_id=body.annotator_id,
                selected=tuple(body.selected),
                none=body.none,
            )
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err))
        try:
            stored = store.record_response(response)
        except AnnotationStoreError as err:
            status = 404 if "unknown task" in str(err) else 422
            raise HTTPException(status_code=status, detail=str(err))
        payload = _next_payload(store, body.annotator_id)
        payload["response"] = stored.to_record()
        return JSONResponse(payload)

    @app.get("/api/progress")
    def progress():
        return JSONResponse(_progress_payload(store))

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(store: AnnotationStore, port: int = 8765, ui_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(store, ui_dir), host="127.0.0.1", port=port)
