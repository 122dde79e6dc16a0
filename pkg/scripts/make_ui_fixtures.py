#!/usr/bin/env python3
"""Regenerate the frontend test fixtures from the primary pipeline.

Runs the demo session through the CLI and the HTTP service and captures
the exact response documents the UI consumes. Keeps the frontend's mocked
API honest: its payloads are real outputs, not hand-written approximations.

Usage:
    python scripts/make_ui_fixtures.py --out frontend/tests/fixtures
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from panovis.service import ServiceConfig, create_app
from panovis.synth import demo_session


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="frontend/tests/fixtures")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as td:
        session_dir = Path(td) / "session"
        demo_session(session_dir, n_frames=30, seed=args.seed)

        run_dir = Path(td) / "run"
        subprocess.run(
            [sys.executable, "-m", "panovis", "stitch", "--session", str(session_dir),
             "--range", "5:24", "--seed", "3", "--out", str(run_dir)],
            check=True,
        )
        subprocess.run(
            [sys.executable, "-m", "panovis", "analytics", "--session", str(session_dir),
             "--missing-frames", "5", "--panorama", str(run_dir / "panorama.json"),
             "--out", str(run_dir)],
            check=True,
        )
        (out / "panorama.json").write_text((run_dir / "panorama.json").read_text())
        (out / "analytics.json").write_text((run_dir / "analytics.json").read_text())

        app = create_app(ServiceConfig())
        with TestClient(app) as client:
            sid = client.post("/sessions", json={"root": str(session_dir)}).json()["session_id"]
            (out / "meta.json").write_text(json.dumps(client.get(f"/sessions/{sid}/meta").json(), indent=1))
            (out / "events.json").write_text(
                json.dumps(client.get(f"/sessions/{sid}/events", params={"missing": 5}).json(), indent=1)
            )
            (out / "summary_confidence.json").write_text(
                json.dumps(client.get(f"/sessions/{sid}/timeline/summary",
                                      params={"metric": "confidence"}).json(), indent=1)
            )
            (out / "summary_iou.json").write_text(
                json.dumps(client.get(f"/sessions/{sid}/timeline/summary",
                                      params={"metric": "iou"}).json(), indent=1)
            )
            (out / "classification.json").write_text(
                json.dumps(client.get(f"/sessions/{sid}/timeline/classification").json(), indent=1)
            )
            r = client.post(f"/sessions/{sid}/panoramas", json={"frame_range": [5, 24], "seed": 3})
            job_id = r.json()["job_id"]
            while True:
                job = client.get(f"/jobs/{job_id}").json()
                if job["state"] in ("done", "failed"):
                    break
                time.sleep(0.05)
            assert job["state"] == "done", job
            pid = job["result"]
            (out / "job.json").write_text(json.dumps(job, indent=1))
            (out / "distance.json").write_text(
                json.dumps(client.get(f"/panoramas/{pid}/distance").json(), indent=1)
            )
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
