"""HTTP contract: status codes, job lifecycle, restart recovery."""

import io
import json
import os
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tabsynth.service import create_app


def sample_csv_bytes(n=100, seed=0):
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(n) < 0.5, rng.normal(-2, 0.3, n),
                 rng.normal(2, 0.3, n))
    cats = rng.choice(["red", "blue"], size=n, p=[0.7, 0.3])
    label = ["hot" if (v > 0) == (c == "red") else "cold"
             for v, c in zip(x, cats)]
    lines = ["amount,color,label"]
    lines += ["%.6f,%s,%s" % (v, c, l) for v, c, l in zip(x, cats, label)]
    return ("\n".join(lines) + "\n").encode()


@pytest.fixture
def client(tmp_path):
    app = create_app(os.path.join(tmp_path, "ws"))
    with TestClient(app) as c:
        c.workspace = os.path.join(tmp_path, "ws")
        yield c


def upload(client, data=None, name="sample.csv"):
    data = data if data is not None else sample_csv_bytes()
    r = client.post("/datasets",
                    files={"file": (name, io.BytesIO(data), "text/csv")})
    return r


def wait_job(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get("/jobs/%s" % job_id).json()
        if doc["state"] in ("done", "failed"):
            return doc
        time.sleep(0.02)
    raise TimeoutError(job_id)


def train_model(client, dataset_id, epochs=2, **extra):
    body = {"dataset_id": dataset_id, "epochs": epochs,
            "batch_size": 40, "seed": 1}
    body.update(extra)
    r = client.post("/models", json=body)
    assert r.status_code == 202, r.text
    doc = r.json()
    job = wait_job(client, doc["job_id"])
    assert job["state"] == "done", job["error"]
    return doc["model_id"]


def test_upload_returns_201_and_schema(client):
    r = upload(client)
    assert r.status_code == 201
    doc = r.json()
    kinds = {c["name"]: c["kind"] for c in doc["schema"]["columns"]}
    assert kinds == {"amount": "continuous", "color": "categorical",
                     "label": "categorical"}
    assert doc["rows"] == 100


def test_ragged_upload_returns_422(client):
    r = upload(client, data=b"a,b\n1,2\n3\n")
    assert r.status_code == 422
    assert "row" in r.json()["detail"]


def test_reupload_same_file_gets_new_id(client):
    a = upload(client).json()["id"]
    b = upload(client).json()["id"]
    assert a != b


def test_schema_override_persists_and_echoes(client):
    dataset_id = upload(client).json()["id"]
    r = client.put("/datasets/%s/schema" % dataset_id, json={
        "columns": {"amount": {"kind": "mixed",
                               "categorical_values": [0.0]}},
        "target": {"column": "label", "problem": "binary"}})
    assert r.status_code == 200
    doc = r.json()["schema"]
    by_name = {c["name"]: c for c in doc["columns"]}
    assert by_name["amount"]["kind"] == "mixed"
    assert by_name["amount"]["categorical_values"] == [0.0]
    assert doc["target"] == {"column": "label", "problem": "binary"}
    # GET reflects the stored override
    echoed = client.get("/datasets/%s" % dataset_id).json()["schema"]
    assert echoed == doc


def test_schema_override_exclude_column(client):
    dataset_id = upload(client).json()["id"]
    r = client.put("/datasets/%s/schema" % dataset_id,
                   json={"columns": {"color": {"include": False}}})
    assert r.status_code == 200
    by_name = {c["name"]: c for c in r.json()["schema"]["columns"]}
    assert by_name["color"]["include"] is False


def test_schema_override_unknown_column_404(client):
    dataset_id = upload(client).json()["id"]
    r = client.put("/datasets/%s/schema" % dataset_id,
                   json={"columns": {"ghost": {"kind": "categorical"}}})
    assert r.status_code == 404
    assert client.put("/datasets/nope/schema", json={}).status_code == 404


def test_schema_override_invalid_kind_422_and_not_stored(client):
    dataset_id = upload(client).json()["id"]
    # color holds tokens; claiming it is continuous must fail now, not
    # at training time, and must not corrupt the stored overrides
    r = client.put("/datasets/%s/schema" % dataset_id,
                   json={"columns": {"color": {"kind": "continuous"}}})
    assert r.status_code == 422
    echoed = client.get("/datasets/%s" % dataset_id).json()["schema"]
    kinds = {c["name"]: c["kind"] for c in echoed["columns"]}
    assert kinds["color"] == "categorical"


def test_train_job_runs_to_done_with_progress(client):
    dataset_id = upload(client).json()["id"]
    client.put("/datasets/%s/schema" % dataset_id,
               json={"target": {"column": "label", "problem": "binary"}})
    r = client.post("/models", json={"dataset_id": dataset_id,
                                     "epochs": 3, "batch_size": 40})
    assert r.status_code == 202
    doc = r.json()
    job = wait_job(client, doc["job_id"])
    assert job["state"] == "done"
    assert job["artifact"] == doc["model_id"]
    assert job["progress"]["epoch"] == 3
    assert job["progress"]["total_epochs"] == 3
    assert len(job["progress"]["history"]["d_loss"]) == 3
    model = client.get("/models/%s" % doc["model_id"]).json()
    assert "classifier_ce" in model["history"]


def test_train_epochs_zero_422(client):
    dataset_id = upload(client).json()["id"]
    r = client.post("/models", json={"dataset_id": dataset_id, "epochs": 0})
    assert r.status_code == 422


def test_train_unknown_dataset_404(client):
    r = client.post("/models", json={"dataset_id": "nope", "epochs": 1})
    assert r.status_code == 404


def test_second_train_queues_fifo(client):
    dataset_id = upload(client, data=sample_csv_bytes(400, seed=3)).json()["id"]
    r1 = client.post("/models", json={"dataset_id": dataset_id,
                                      "epochs": 8, "batch_size": 50,
                                      "seed": 1})
    r2 = client.post("/models", json={"dataset_id": dataset_id,
                                      "epochs": 2, "batch_size": 50,
                                      "seed": 2})
    assert r1.status_code == 202 and r2.status_code == 202
    j1 = wait_job(client, r1.json()["job_id"])
    j2 = wait_job(client, r2.json()["job_id"])
    assert j1["state"] == "done" and j2["state"] == "done"
    # strict serialization: the second starts only after the first ends
    assert j2["started_at"] >= j1["finished_at"]


def test_synthesize_and_download(client):
    dataset_id = upload(client).json()["id"]
    model_id = train_model(client, dataset_id)
    r = client.post("/models/%s/synthesize" % model_id, json={"rows": 30})
    assert r.status_code == 202
    doc = r.json()
    job = wait_job(client, doc["job_id"])
    assert job["state"] == "done"
    csv = client.get("/synthetic/%s.csv" % doc["synthetic_id"])
    assert csv.status_code == 200
    lines = csv.text.strip().splitlines()
    assert lines[0] == "amount,color,label"
    assert len(lines) == 31


def test_synthesize_before_training_409(client):
    dataset_id = upload(client, data=sample_csv_bytes(400, seed=4)).json()["id"]
    r = client.post("/models", json={"dataset_id": dataset_id,
                                     "epochs": 10, "batch_size": 50})
    model_id = r.json()["model_id"]
    r2 = client.post("/models/%s/synthesize" % model_id, json={"rows": 5})
    assert r2.status_code == 409
    wait_job(client, r.json()["job_id"])


def test_synthesize_unknown_model_404(client):
    r = client.post("/models/feedbeef/synthesize", json={"rows": 5})
    assert r.status_code == 404


def test_synthesize_zero_rows_422(client):
    dataset_id = upload(client).json()["id"]
    model_id = train_model(client, dataset_id)
    r = client.post("/models/%s/synthesize" % model_id, json={"rows": 0})
    assert r.status_code == 422


def test_report_flow_and_zero_divergence_on_copy(client):
    raw = sample_csv_bytes(80, seed=5)
    dataset_id = upload(client, data=raw).json()["id"]
    model_id = train_model(client, dataset_id)
    # synthetic = byte-copy of the real file, registered via synthesis
    # of the same row count, then overwritten to the known content
    r = client.post("/models/%s/synthesize" % model_id, json={"rows": 80})
    doc = r.json()
    wait_job(client, doc["job_id"])
    synth_path = os.path.join(client.workspace, "synthetic",
                              doc["synthetic_id"] + ".csv")
    with open(synth_path, "wb") as fh:
        fh.write(raw)
    rr = client.post("/reports", json={"model_id": model_id,
                                       "synthetic_id": doc["synthetic_id"]})
    assert rr.status_code == 202
    rdoc = rr.json()
    job = wait_job(client, rdoc["job_id"])
    assert job["state"] == "done", job["error"]
    report = client.get("/reports/%s" % rdoc["report_id"]).json()
    assert report["similarity"]["avg_jsd"] == 0.0
    assert report["similarity"]["avg_wasserstein_scaled"] == 0.0
    assert report["privacy"]["dcr"]["real_synthetic"] == 0.0
    assert report["model_id"] == model_id
    for col in ("amount", "color", "label"):
        assert col in report["similarity"]["columns"]


def test_report_unknown_model_404(client):
    r = client.post("/reports", json={"model_id": "nope",
                                      "synthetic_id": "nope"})
    assert r.status_code == 404
    assert client.get("/reports/nope").status_code == 404


def test_unknown_job_404(client):
    assert client.get("/jobs/nope").status_code == 404


def test_restart_recovers_artifacts(tmp_path):
    ws_dir = os.path.join(tmp_path, "ws")
    app = create_app(ws_dir)
    with TestClient(app) as client:
        client.workspace = ws_dir
        dataset_id = upload(client).json()["id"]
        model_id = train_model(client, dataset_id)
        r = client.post("/models/%s/synthesize" % model_id,
                        json={"rows": 12})
        doc = r.json()
        wait_job(client, doc["job_id"])
        synthetic_id = doc["synthetic_id"]
    # fresh app over the same workspace: artifacts still served
    with TestClient(create_app(ws_dir)) as client2:
        assert client2.get("/datasets/%s" % dataset_id).status_code == 200
        assert client2.get("/models/%s" % model_id).status_code == 200
        csv = client2.get("/synthetic/%s.csv" % synthetic_id)
        assert csv.status_code == 200
        assert len(csv.text.strip().splitlines()) == 13
        # and new work can proceed against recovered artifacts
        r = client2.post("/models/%s/synthesize" % model_id,
                         json={"rows": 5, "seed": 7})
        assert r.status_code == 202


def test_ablation_flags_reach_training(client):
    dataset_id = upload(client).json()["id"]
    client.put("/datasets/%s/schema" % dataset_id,
               json={"target": {"column": "label", "problem": "binary"}})
    model_id = train_model(client, dataset_id, classifier=False,
                           info_loss=False)
    model = client.get("/models/%s" % model_id).json()
    assert "classifier_ce" not in model["history"]
    assert "info_loss" not in model["history"]
    assert model["config"]["classifier_on"] is False
