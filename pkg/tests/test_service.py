from __future__ import annotations

import io
import time

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from panovis import analytics
from panovis.ingest import load_session
from panovis.service import ServiceConfig, create_app


@pytest.fixture(scope="module")
def client(demo_session_dir):
    app = create_app(ServiceConfig())
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def session_id(client, demo_session_dir):
    r = client.post("/sessions", json={"root": str(demo_session_dir)})
    assert r.status_code == 200
    return r.json()["session_id"]


def poll_job(client, job_id: str, timeout: float = 60.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.02)
    raise TimeoutError(job_id)


def build(client, session_id: str, params: dict) -> str:
    r = client.post(f"/sessions/{session_id}/panoramas", json=params)
    assert r.status_code == 200, r.text
    job = poll_job(client, r.json()["job_id"])
    assert job["state"] == "done", job
    return job["result"]


class TestSessions:
    def test_reopen_gives_identical_content_hash(self, client, demo_session_dir, session_id):
        r = client.post("/sessions", json={"root": str(demo_session_dir)})
        assert r.json()["session_id"] == session_id

    def test_missing_session_dir_is_structured_404(self, client, tmp_path):
        r = client.post("/sessions", json={"root": str(tmp_path / "nope")})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "MissingFile"

    def test_meta(self, client, session_id):
        meta = client.get(f"/sessions/{session_id}/meta").json()
        assert meta["frames"] == 30
        assert meta["width"] > 0
        assert "mug" in meta["vocabulary"]

    def test_unknown_session(self, client):
        assert client.get("/sessions/feedbeef/meta").status_code == 404

    def test_frame_png(self, client, session_id):
        r = client.get(f"/sessions/{session_id}/frames/0")
        assert r.status_code == 200
        img = Image.open(io.BytesIO(r.content))
        assert img.format == "PNG"


class TestTimelineEndpoints:
    def test_summary_equals_library(self, client, session_id, demo_session_dir):
        session = load_session(demo_session_dir)
        got = client.get(f"/sessions/{session_id}/timeline/summary", params={"metric": "iou"}).json()
        matrix = analytics.summary_matrix(session, "iou")
        assert got["labels"] == list(matrix.labels)
        assert got["values"] == [list(r) for r in matrix.values]

    def test_classification_equals_library(self, client, session_id, demo_session_dir):
        session = load_session(demo_session_dir)
        got = client.get(f"/sessions/{session_id}/timeline/classification").json()
        expected = analytics.classify_session(session, 0.5)
        assert [(c["tp"], c["fp"], c["fn"], c["tn"]) for c in got] == [
            (c.tp, c.fp, c.fn, c.tn) for c in expected
        ]

    def test_events_equals_library(self, client, session_id, demo_session_dir):
        session = load_session(demo_session_dir)
        got = client.get(f"/sessions/{session_id}/events", params={"missing": 5}).json()
        expected = analytics.poi_events(session, 5)
        assert [(e["kind"], e["frame_id"], e["label"]) for e in got] == [
            (e.kind, e.frame_id, e.label) for e in expected
        ]

    def test_distance_requires_panorama_id(self, client, session_id):
        r = client.get(f"/sessions/{session_id}/timeline/distance")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "MissingPanorama"

    def test_bad_metric_rejected(self, client, session_id):
        r = client.get(f"/sessions/{session_id}/timeline/summary", params={"metric": "bogus"})
        assert r.status_code == 400


class TestPanoramaJobs:
    def test_build_poll_fetch(self, client, session_id):
        pid = build(client, session_id, {"frame_range": [8, 14], "seed": 5})
        image = client.get(f"/panoramas/{pid}/image")
        assert image.status_code == 200
        assert Image.open(io.BytesIO(image.content)).format == "PNG"
        report = client.get(f"/panoramas/{pid}/report").json()
        assert {p["frame_id"] for p in report["placements"]} == set(range(8, 15))

    def test_duplicate_submit_is_cache_hit(self, client, session_id):
        params = {"frame_range": [8, 14], "seed": 5}
        pid = build(client, session_id, params)
        r = client.post(f"/sessions/{session_id}/panoramas", json=params)
        assert r.json()["state"] == "done"
        job = client.get(f"/jobs/{r.json()['job_id']}").json()
        assert job["result"] == pid

    def test_base_outside_range_rejected(self, client, session_id):
        r = client.post(
            f"/sessions/{session_id}/panoramas",
            json={"frame_range": [8, 14], "base_frame_id": 2},
        )
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "InvalidRange"

    def test_concurrent_distinct_submits_both_complete(self, client, session_id):
        ra = client.post(f"/sessions/{session_id}/panoramas", json={"frame_range": [8, 13], "seed": 1})
        rb = client.post(f"/sessions/{session_id}/panoramas", json={"frame_range": [15, 20], "seed": 1})
        ja = poll_job(client, ra.json()["job_id"])
        jb = poll_job(client, rb.json()["job_id"])
        assert ja["state"] == jb["state"] == "done"
        assert ja["result"] != jb["result"]

    def test_unknown_job_and_panorama(self, client):
        assert client.get("/jobs/job-missing").status_code == 404
        assert client.get("/panoramas/missing/image").status_code == 404

    def test_job_record_is_monotone(self, client, session_id):
        r = client.post(f"/sessions/{session_id}/panoramas", json={"frame_range": [9, 12], "seed": 2})
        job_id = r.json()["job_id"]
        seen = [client.get(f"/jobs/{job_id}").json()["state"]]
        poll_job(client, job_id)
        seen.append(client.get(f"/jobs/{job_id}").json()["state"])
        order = {"queued": 0, "running": 1, "done": 2, "failed": 2}
        assert order[seen[0]] <= order[seen[1]]


class TestOverlays:
    def test_overlay_changes_leave_panorama_bytes_identical(self, client, session_id):
        pid = build(client, session_id, {"frame_range": [8, 14], "seed": 5})
        before = client.get(f"/panoramas/{pid}/image").content
        overlays = set()
        for style in ("boxes", "centroids", "arrows"):
            o = client.get(f"/panoramas/{pid}/overlay", params={"style": style})
            assert o.status_code == 200
            overlays.add(o.content)
        after = client.get(f"/panoramas/{pid}/image").content
        assert before == after
        assert len(overlays) == 3

    def test_repeated_spec_byte_identical(self, client, session_id):
        pid = build(client, session_id, {"frame_range": [8, 14], "seed": 5})
        a = client.get(f"/panoramas/{pid}/overlay", params={"style": "boxes", "min_conf": 0.4}).content
        b = client.get(f"/panoramas/{pid}/overlay", params={"style": "boxes", "min_conf": 0.4}).content
        assert a == b

    def test_overlay_validation(self, client, session_id):
        pid = build(client, session_id, {"frame_range": [8, 14], "seed": 5})
        assert client.get(f"/panoramas/{pid}/overlay", params={"min_conf": 1.01}).status_code == 400
        assert client.get(f"/panoramas/{pid}/overlay", params={"style": "bogus"}).status_code == 400

    def test_distance_series_served(self, client, session_id):
        pid = build(client, session_id, {"frame_range": [8, 20], "seed": 5})
        doc = client.get(f"/panoramas/{pid}/distance").json()
        assert doc["panorama_id"] == pid
        assert isinstance(doc["series"], list)
        via_timeline = client.get(
            f"/sessions/{session_id}/timeline/distance", params={"panorama_id": pid}
        ).json()
        assert via_timeline == doc


class TestAllowList:
    def test_roots_restriction(self, tmp_path, demo_session_dir):
        app = create_app(ServiceConfig(session_roots=(tmp_path / "allowed",)))
        with TestClient(app) as c:
            r = c.post("/sessions", json={"root": str(demo_session_dir)})
            assert r.status_code == 404
