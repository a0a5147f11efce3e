"""HTTP facade over the pipeline: upload, schema review, training
jobs, synthesis, and report retrieval.

State lives in a workspace manifest (single JSON file, lock-guarded
writes) plus content-addressed artifact files, so a restarted service
recovers every completed dataset, model, synthetic file, and report.
Jobs are in-memory only; at most one executes at a time, FIFO, on a
dedicated worker thread. Clients poll GET /jobs/{id}.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import queue
import threading
import time

from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse

from .data import (RaggedRowError, Schema, SchemaError, TargetSpec,
                   apply_overrides, infer_schema, load_csv, stratified_split,
                   validate_against_schema, write_csv)
from .evaluate import build_report
from .gan import (TrainConfig, build_bundle, load_bundle, save_bundle,
                  synthesize, train)


def _digest(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes)
                 else json.dumps(p, sort_keys=True).encode())
        h.update(b"\x00")
    return h.hexdigest()[:12]


class Job:
    def __init__(self, job_id, kind):
        self.id = job_id
        self.kind = kind
        self.state = "queued"
        self.progress = {}
        self.error = None
        self.artifact = None
        self.started_at = None
        self.finished_at = None

    def to_dict(self):
        return {"id": self.id, "kind": self.kind, "state": self.state,
                "progress": self.progress, "error": self.error,
                "artifact": self.artifact,
                "started_at": self.started_at,
                "finished_at": self.finished_at}


class Workspace:
    """Manifest-backed artifact store shared with the CLI.

    The manifest maps artifact ids to their metadata; files live under
    datasets/, models/, synthetic/, reports/. All mutations go through
    a single lock so concurrent request handlers stay consistent.
    """

    def __init__(self, root):
        self.root = root
        self.lock = threading.Lock()
        for sub in ("datasets", "models", "synthetic", "reports"):
            os.makedirs(os.path.join(root, sub), exist_ok=True)
        self.manifest_path = os.path.join(root, "manifest.json")
        if os.path.exists(self.manifest_path):
            with open(self.manifest_path) as fh:
                self.manifest = json.load(fh)
        else:
            self.manifest = {"datasets": {}, "models": {},
                             "synthetic": {}, "reports": {},
                             "uploads": 0}

    def _flush(self):
        tmp = self.manifest_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(self.manifest, fh, indent=1)
        os.replace(tmp, self.manifest_path)

    def update(self, section, key, value):
        with self.lock:
            self.manifest[section][key] = value
            self._flush()

    def bump_uploads(self):
        with self.lock:
            self.manifest["uploads"] += 1
            self._flush()
            return self.manifest["uploads"]

    def path(self, *parts):
        return os.path.join(self.root, *parts)


def _effective_schema(entry):
    """Inferred schema with the stored override document applied."""
    schema = Schema.from_dict(entry["inferred"])
    target = None
    if entry.get("overrides"):
        schema, target = apply_overrides(schema, entry["overrides"])
    return schema, target


def _schema_payload(schema, target):
    doc = schema.to_dict()
    doc["target"] = (None if target is None else
                     {"column": target.column, "problem": target.problem})
    return doc


def create_app(workspace_dir):
    ws = Workspace(workspace_dir)
    app = FastAPI(title="tabsynth")
    # the browser front end is served separately during development
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    jobs = {}
    pending_models = {}            # model_id -> train job id
    work_queue = queue.Queue()

    def worker():
        while True:
            job, fn = work_queue.get()
            job.state = "running"
            job.started_at = time.time()
            try:
                job.artifact = fn(job)
                job.state = "done"
            except Exception as exc:
                job.error = str(exc)
                job.state = "failed"
            finally:
                job.finished_at = time.time()
                work_queue.task_done()

    threading.Thread(target=worker, daemon=True).start()

    def enqueue(kind, fn):
        job = Job(_digest(kind, str(time.time()), str(len(jobs))), kind)
        jobs[job.id] = job
        work_queue.put((job, fn))
        return job

    # -- datasets ----------------------------------------------------------

    @app.post("/datasets", status_code=201)
    async def upload_dataset(file: UploadFile):
        raw = await file.read()
        seq = ws.bump_uploads()
        dataset_id = _digest(raw, str(seq))
        path = ws.path("datasets", dataset_id + ".csv")
        with open(path, "wb") as fh:
            fh.write(raw)
        try:
            table = load_csv(path)
            schema = infer_schema(table)
        except RaggedRowError as exc:
            os.remove(path)
            raise HTTPException(422, str(exc))
        entry = {"filename": file.filename, "inferred": schema.to_dict(),
                 "overrides": None, "rows": table.n_rows}
        ws.update("datasets", dataset_id, entry)
        return {"id": dataset_id, "rows": table.n_rows,
                "schema": _schema_payload(schema, None)}

    def _dataset_entry(dataset_id):
        entry = ws.manifest["datasets"].get(dataset_id)
        if entry is None:
            raise HTTPException(404, "unknown dataset %r" % dataset_id)
        return entry

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        entry = _dataset_entry(dataset_id)
        schema, target = _effective_schema(entry)
        return {"id": dataset_id, "rows": entry["rows"],
                "filename": entry["filename"],
                "schema": _schema_payload(schema, target)}

    @app.put("/datasets/{dataset_id}/schema")
    def put_schema(dataset_id: str, overrides: dict):
        entry = _dataset_entry(dataset_id)
        inferred = Schema.from_dict(entry["inferred"])
        known = {c.name for c in inferred.columns}
        named = set((overrides.get("columns") or {}).keys())
        if overrides.get("target"):
            named.add(overrides["target"].get("column"))
        missing = sorted(named - known)
        if missing:
            raise HTTPException(404, "unknown column(s): %s"
                                % ", ".join(map(str, missing)))
        try:
            schema, target = apply_overrides(inferred, overrides)
            # a kind override must hold against the stored data, e.g.
            # continuous on a token column is rejected here, not at
            # training time
            validate_against_schema(
                load_csv(ws.path("datasets", dataset_id + ".csv")), schema)
        except SchemaError as exc:
            raise HTTPException(422, str(exc))
        entry = dict(entry, overrides=overrides)
        ws.update("datasets", dataset_id, entry)
        return {"id": dataset_id, "schema": _schema_payload(schema, target)}

    # -- models / training ---------------------------------------------------

    @app.post("/models", status_code=202)
    def post_model(body: dict):
        dataset_id = body.get("dataset_id")
        if not dataset_id:
            raise HTTPException(422, "dataset_id is required")
        entry = _dataset_entry(dataset_id)
        epochs = body.get("epochs", 150)
        if not isinstance(epochs, int) or epochs <= 0:
            raise HTTPException(422, "epochs must be a positive integer")
        schema, target = _effective_schema(entry)
        if body.get("target"):
            td = body["target"]
            target = TargetSpec(td["column"], td.get("problem", "multiclass"))
            if target.column not in {c.name for c in schema.columns}:
                raise HTTPException(404, "unknown column %r" % target.column)
        elif body.get("problem") and target is not None:
            target = TargetSpec(target.column, body["problem"])
        config = TrainConfig(
            epochs=epochs,
            batch_size=body.get("batch_size", 500),
            seed=body.get("seed", 0),
            classifier_on=body.get("classifier", True),
            info_loss_on=body.get("info_loss", True),
            vgm_on=body.get("vgm", True))
        csv_path = ws.path("datasets", dataset_id + ".csv")
        with open(csv_path, "rb") as fh:
            raw = fh.read()
        model_id = _digest(raw, _schema_payload(schema, target),
                           config.to_dict())

        def run(job):
            table = load_csv(csv_path)
            validate_against_schema(table, schema)
            bundle, X = build_bundle(table, schema, target, config)

            def tick(epoch, total, history):
                job.progress = {"epoch": epoch, "total_epochs": total,
                                "history": {k: list(v)
                                            for k, v in history.items()}}

            train(bundle, X, config, progress=tick)
            save_bundle(bundle, ws.path("models", model_id))
            ws.update("models", model_id,
                      {"dataset_id": dataset_id,
                       "config": config.to_dict(),
                       "target": (None if target is None else
                                  {"column": target.column,
                                   "problem": target.problem})})
            return model_id

        job = enqueue("train", run)
        pending_models[model_id] = job.id
        return {"job_id": job.id, "model_id": model_id}

    def _model_entry(model_id):
        entry = ws.manifest["models"].get(model_id)
        if entry is None:
            raise HTTPException(404, "unknown model %r" % model_id)
        return entry

    @app.get("/models/{model_id}")
    def get_model(model_id: str):
        entry = _model_entry(model_id)
        meta_path = ws.path("models", model_id, "meta.json")
        with open(meta_path) as fh:
            meta = json.load(fh)
        return {"id": model_id, "dataset_id": entry["dataset_id"],
                "config": entry["config"], "target": entry["target"],
                "history": meta["history"]}

    # -- jobs ----------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job %r" % job_id)
        return job.to_dict()

    # -- synthesis -------------------------------------------------------------

    @app.post("/models/{model_id}/synthesize", status_code=202)
    def post_synthesize(model_id: str, body: dict):
        bundle_dir = ws.path("models", model_id)
        if not os.path.exists(os.path.join(bundle_dir, "meta.json")):
            train_job = jobs.get(pending_models.get(model_id))
            if train_job is not None and train_job.state in ("queued",
                                                             "running"):
                raise HTTPException(409, "model %r is not trained yet"
                                    % model_id)
            raise HTTPException(404, "unknown model %r" % model_id)
        rows = body.get("rows")
        if not isinstance(rows, int) or rows <= 0:
            raise HTTPException(422, "rows must be a positive integer")
        seed = body.get("seed")
        synthetic_id = _digest(model_id, str(rows), str(seed))

        def run(job):
            bundle = load_bundle(bundle_dir)
            out = ws.path("synthetic", synthetic_id + ".csv")
            table = synthesize(bundle, rows, seed=seed)
            job.progress = {"rows": table.n_rows, "total_rows": rows}
            write_csv(table, out)
            ws.update("synthetic", synthetic_id,
                      {"model_id": model_id, "rows": rows, "seed": seed})
            return synthetic_id

        job = enqueue("synthesize", run)
        return {"job_id": job.id, "synthetic_id": synthetic_id}

    @app.get("/synthetic/{synthetic_id}.csv")
    def get_synthetic(synthetic_id: str):
        path = ws.path("synthetic", synthetic_id + ".csv")
        if not os.path.exists(path):
            raise HTTPException(404, "unknown synthetic file %r"
                                % synthetic_id)
        return FileResponse(path, media_type="text/csv",
                            filename=synthetic_id + ".csv")

    # -- reports ---------------------------------------------------------------

    @app.post("/reports", status_code=202)
    def post_report(body: dict):
        model_id = body.get("model_id")
        synthetic_id = body.get("synthetic_id")
        model_entry = _model_entry(model_id)
        if ws.manifest["synthetic"].get(synthetic_id) is None:
            raise HTTPException(404, "unknown synthetic file %r"
                                % synthetic_id)
        report_id = _digest(model_id, synthetic_id)

        def run(job):
            dataset_id = model_entry["dataset_id"]
            entry = ws.manifest["datasets"][dataset_id]
            schema, target = _effective_schema(entry)
            if model_entry["target"]:
                target = TargetSpec(model_entry["target"]["column"],
                                    model_entry["target"]["problem"])
            real = load_csv(ws.path("datasets", dataset_id + ".csv"))
            synth = load_csv(ws.path("synthetic", synthetic_id + ".csv"))
            test = None
            if target is not None and target.problem != "none":
                real, test = stratified_split(real, target, 0.2, seed=0)
            doc = build_report(real, synth, schema, target=target, test=test)
            doc["model_id"] = model_id
            doc["synthetic_id"] = synthetic_id
            with open(ws.path("reports", report_id + ".json"), "w") as fh:
                json.dump(doc, fh, indent=1)
            ws.update("reports", report_id,
                      {"model_id": model_id, "synthetic_id": synthetic_id})
            return report_id

        job = enqueue("report", run)
        return {"job_id": job.id, "report_id": report_id}

    @app.get("/reports/{report_id}")
    def get_report(report_id: str):
        path = ws.path("reports", report_id + ".json")
        if not os.path.exists(path):
            raise HTTPException(404, "unknown report %r" % report_id)
        with open(path) as fh:
            return JSONResponse(json.load(fh))

    @app.exception_handler(SchemaError)
    def schema_error(request: Request, exc: SchemaError):
        return JSONResponse({"detail": str(exc)}, status_code=422)

    return app


def main(argv=None):
    parser = argparse.ArgumentParser(prog="tabsynth-serve")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--workspace", default="workspace")
    args = parser.parse_args(argv)
    import uvicorn
    uvicorn.run(create_app(args.workspace), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
