"""HTTP annotation service.

Serves (video, caption) judgment tasks, accepts boolean judgment records,
appends them to a JSONL store, and reports the live aggregate SS Score.
Judgments are recomputed from the store on every read, so a restart (or
the offline CLI aggregation) always agrees with /score.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, StrictBool, StrictStr

from .metrics import JudgmentRecord, append_judgment, read_judgments, ss_aggregate

DEFAULT_REQUIRED_ANNOTATORS = 2


def task_id_for(video_id: str, caption: str) -> str:
    digest = hashlib.sha1(f"{video_id}\n{caption}".encode("utf-8")).hexdigest()
    return f"t{digest[:12]}"


class TaskStore:
    """Task manifest plus append-only judgment log on disk.

    Appends and duplicate checks happen under one lock, so no concurrent
    POST can slip in a second judgment for the same (task, annotator).
    """

    def __init__(self, store_dir, required_annotators=DEFAULT_REQUIRED_ANNOTATORS):
        self.dir = Path(store_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.tasks_path = self.dir / "tasks.json"
        self.judgments_path = self.dir / "judgments.jsonl"
        self.required_annotators = required_annotators
        self._lock = threading.Lock()

    def load_tasks(self):
        if not self.tasks_path.exists():
            return {}
        with open(self.tasks_path, "r", encoding="utf-8") as fh:
            return {t["task_id"]: t for t in json.load(fh)}

    def save_tasks(self, tasks):
        ordered = sorted(tasks.values(), key=lambda t: t["task_id"])
        with open(self.tasks_path, "w", encoding="utf-8") as fh:
            json.dump(ordered, fh, indent=2)
            fh.write("\n")

    def read_records(self):
        return read_judgments(self.judgments_path)

    def task_views(self):
        counts = {}
        for rec in self.read_records():
            counts[task_id_for(rec.video_id, rec.caption)] = counts.get(
                task_id_for(rec.video_id, rec.caption), 0) + 1
        views = []
        for task in sorted(self.load_tasks().values(), key=lambda t: t["task_id"]):
            received = counts.get(task["task_id"], 0)
            views.append({
                **task,
                "judgments_received": received,
                "status": "done" if received >= self.required_annotators else "open",
            })
        return views

    def add_judgment(self, task, body) -> JudgmentRecord:
        record = JudgmentRecord(
            video_id=task["video_id"],
            caption=task["generated_caption"],
            annotator_id=body.annotator_id,
            s_grammar=body.s_grammar,
            element_recall=list(body.element_recall),
            element_precision=list(body.element_precision),
            action_recall=body.action_recall,
            action_precision=body.action_precision,
            timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            element_recall_labels=list(body.element_recall_labels or []),
            element_precision_labels=list(body.element_precision_labels or []),
        )
        with self._lock:
            for existing in self.read_records():
                if (task_id_for(existing.video_id, existing.caption) == task["task_id"]
                        and existing.annotator_id == record.annotator_id):
                    raise HTTPException(
                        status_code=409,
                        detail=f"annotator {record.annotator_id!r} already judged task {task['task_id']}",
                    )
            append_judgment(self.judgments_path, record)
        return record


def import_tasks(captions_path, manifest_path, store: TaskStore, references_path=None):
    """One task per (video, generated caption); idempotent, deterministic ids."""
    with open(captions_path, "r", encoding="utf-8") as fh:
        captions = json.load(fh)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    references = None
    if references_path is not None:
        with open(references_path, "r", encoding="utf-8") as fh:
            references = json.load(fh)
    tasks = store.load_tasks()
    for video_id, caption in sorted(captions.items()):
        if isinstance(caption, list):
            raise ValueError(f"video {video_id!r}: expected one generated caption, got a list")
        if video_id not in manifest:
            raise ValueError(f"video {video_id!r} missing from the manifest")
        tid = task_id_for(video_id, caption)
        task = {
            "task_id": tid,
            "video_id": video_id,
            "video_url": manifest[video_id],
            "generated_caption": caption,
        }
        if references is not None and video_id in references:
            task["reference_captions"] = list(references[video_id])
        tasks[tid] = task
    store.save_tasks(tasks)
    return len(tasks)


class JudgmentIn(BaseModel):
    annotator_id: StrictStr
    s_grammar: StrictBool
    element_recall: list[StrictBool]
    element_precision: list[StrictBool]
    action_recall: StrictBool
    action_precision: StrictBool
    element_recall_labels: list[StrictStr] | None = None
    element_precision_labels: list[StrictStr] | None = None


def create_app(store: TaskStore) -> FastAPI:
    app = FastAPI(title="caption annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/tasks")
    def list_tasks(status: str | None = None):
        views = store.task_views()
        if status is not None:
            if status not in ("open", "done"):
                raise HTTPException(status_code=422, detail=f"unknown status {status!r}")
            views = [v for v in views if v["status"] == status]
        return views

    @app.post("/tasks/{task_id}/judgments", status_code=201)
    def post_judgment(task_id: str, body: JudgmentIn):
        tasks = store.load_tasks()
        if task_id not in tasks:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        record = store.add_judgment(tasks[task_id], body)
        return record.to_dict()

    @app.get("/score")
    def score():
        records = store.read_records()
        if not records:
            raise HTTPException(status_code=409, detail="nothing judged yet")
        return ss_aggregate(records).to_dict()

    return app


def run_service(store_dir, host="127.0.0.1", port=8000,
                required_annotators=DEFAULT_REQUIRED_ANNOTATORS):
    import uvicorn

    store = TaskStore(store_dir, required_annotators=required_annotators)
    app = create_app(store)
    uvicorn.run(app, host=host, port=port, log_level="info")
