"""HTTP annotation service: exposes the pending batch as labeling tasks and
advances the iteration once every task is labeled.

The service is the single writer to its state file while running (lock
file enforced); every mutation is serialized and persisted atomically.
"""

from __future__ import annotations

import contextlib
import datetime
import os
import threading

from fastapi import FastAPI
from fastapi.responses import FileResponse, JSONResponse

from alspeech.core import apply_batch_labels
from alspeech.errors import AlspeechError
from alspeech.storage import load_state, save_state


class StateLock:
    """Exclusive lock file guarding a state file against concurrent writers."""

    def __init__(self, state_path):
        self.path = str(state_path) + ".lock"
        self._held = False

    def acquire(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            from alspeech.errors import LockedError

            raise LockedError(f"state is locked by another writer ({self.path})")
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self._held = True

    def release(self):
        if self._held and os.path.exists(self.path):
            os.unlink(self.path)
        self._held = False

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


class StateService:
    def __init__(self, state_path, media_root=None):
        self.state_path = state_path
        self.media_root = os.path.abspath(media_root) if media_root else None
        self.state = load_state(state_path)
        self._mutex = threading.Lock()
        self._submitted_at = {}

    def _persist(self):
        save_state(self.state, self.state_path)

    def summary(self):
        s = self.state
        pending = s.pending_batch
        return {
            "iteration": s.iteration,
            "labeled_count": len(s.labeled_ids),
            "unlabeled_count": len(s.unlabeled_ids),
            "pending_count": len(pending.ids) if pending else 0,
            "strategy": pending.strategy if pending else s.config.get("strategy"),
            "config_hash": s.config_hash,
        }

    def tasks(self, status=None):
        s = self.state
        if s.pending_batch is None:
            return []
        out = []
        for sid, cid, score in s.pending_batch.chosen:
            rec = s.records.get(sid)
            task_status = "labeled" if sid in s.pending_labels else "pending"
            if status and status != task_status:
                continue
            out.append(
                {
                    "sample_id": sid,
                    "audio_ref": rec.audio_ref if rec else None,
                    "cluster_id": cid,
                    "score": score,
                    "status": task_status,
                    "submitted_text": s.pending_labels.get(sid),
                    "submitted_at": self._submitted_at.get(sid),
                }
            )
        return out

    def submit_label(self, sample_id, text):
        with self._mutex:
            s = self.state
            if s.pending_batch is None or sample_id not in set(s.pending_batch.ids):
                return None, ("not-found", f"no pending task {sample_id!r}")
            existing = s.pending_labels.get(sample_id)
            if existing is not None:
                if existing == text:
                    return {"sample_id": sample_id, "status": "labeled", "noop": True}, None
                return None, (
                    "conflict",
                    f"task {sample_id!r} already labeled with different text",
                )
            s.pending_labels[sample_id] = text
            self._submitted_at[sample_id] = (
                datetime.datetime.now(datetime.timezone.utc).isoformat()
            )
            self._persist()
            return {"sample_id": sample_id, "status": "labeled", "noop": False}, None

    def advance(self, allow_skip=False):
        with self._mutex:
            s = self.state
            if s.pending_batch is None:
                return None, ("state-conflict", "no pending batch to advance")
            pending_ids = set(s.pending_batch.ids)
            unlabeled = pending_ids - set(s.pending_labels)
            if unlabeled and not allow_skip:
                return None, (
                    "conflict",
                    f"{len(unlabeled)} tasks still pending "
                    f"(e.g. {sorted(unlabeled)[:3]})",
                )
            batch = s.pending_batch
            labels = {sid: s.pending_labels[sid] for sid in batch.ids if sid in s.pending_labels}
            if unlabeled:
                # drop skipped ids back into the pool
                kept = [c for c in batch.chosen if c[0] in labels]
                batch = type(batch)(
                    iteration=batch.iteration,
                    strategy=batch.strategy,
                    chosen=kept,
                    quota_plan=batch.quota_plan,
                )
                s.unlabeled_ids |= unlabeled
                s.pending_batch = batch
            try:
                self.state = apply_batch_labels(s, batch, labels)
            except AlspeechError as e:
                return None, (e.code, e.message)
            self._submitted_at = {}
            self._persist()
            return {"iteration": self.state.iteration}, None

    def report(self):
        s = self.state
        return {
            "iteration": s.iteration,
            "history": s.history,
            "scores_digest": (s.scores or {}).get("digest"),
        }

    def clusters(self):
        s = self.state
        if s.clusters is None:
            return {"clusters": [], "quota_plan": None}
        sizes = [
            {"cluster_id": cid, "size": len(members)}
            for cid, members in sorted(s.clusters.clusters.items())
        ]
        if s.clusters.noise:
            sizes.append({"cluster_id": "noise", "size": len(s.clusters.noise)})
        plan = None
        if s.pending_batch is not None and s.pending_batch.quota_plan is not None:
            plan = s.pending_batch.quota_plan.to_dict()
        return {"clusters": sizes, "quota_plan": plan}

    def audio_path(self, sample_id):
        if self.media_root is None:
            return None
        rec = self.state.records.get(sample_id)
        if rec is None or not rec.audio_ref:
            return None
        path = os.path.abspath(os.path.join(self.media_root, rec.audio_ref))
        if not path.startswith(self.media_root + os.sep):
            return None
        return path if os.path.isfile(path) else None


_ERROR_STATUS = {"not-found": 404, "conflict": 409, "state-conflict": 409}


def _error(code, message):
    return JSONResponse(
        status_code=_ERROR_STATUS.get(code, 400),
        content={"code": code, "message": message},
    )


def create_app(state_path, media_root=None, lock=True):
    service = StateService(state_path, media_root=media_root)
    state_lock = StateLock(state_path) if lock else None

    @contextlib.asynccontextmanager
    async def _lifespan(app):
        if state_lock:
            state_lock.acquire()
        try:
            yield
        finally:
            if state_lock:
                state_lock.release()

    app = FastAPI(title="alspeech annotation service", lifespan=_lifespan)
    app.state.service = service

    @app.get("/api/state")
    def get_state():
        return service.summary()

    @app.get("/api/tasks")
    def get_tasks(status: str = None):
        return service.tasks(status=status)

    @app.post("/api/tasks/{sample_id}/label")
    def post_label(sample_id: str, body: dict):
        text = body.get("text")
        if text is None:
            return _error("validation", "body must carry 'text'")
        result, err = service.submit_label(sample_id, text)
        if err:
            return _error(*err)
        return result

    @app.post("/api/iterations/advance")
    def post_advance(body: dict = None):
        allow_skip = bool((body or {}).get("allow_skip", False))
        result, err = service.advance(allow_skip=allow_skip)
        if err:
            return _error(*err)
        return result

    @app.get("/api/report")
    def get_report():
        return service.report()

    @app.get("/api/clusters")
    def get_clusters():
        return service.clusters()

    @app.get("/api/audio/{sample_id}")
    def get_audio(sample_id: str):
        path = service.audio_path(sample_id)
        if path is None:
            return _error("not-found", f"no audio available for {sample_id!r}")
        return FileResponse(path)

    return app
