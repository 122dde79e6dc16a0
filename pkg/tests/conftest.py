from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from panovis import synth
from panovis.ingest import Detection, FrameRef, Session, default_intrinsics, match_detections_to_frames

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_session(
    frame_times: list[float],
    predictions: list[tuple[float, str, tuple[float, float, float, float], float]] = (),
    ground_truth: list[tuple[float, str, tuple[float, float, float, float], float]] = (),
    width: int = 64,
    height: int = 48,
    vocabulary: set[str] | None = None,
) -> Session:
    """In-memory session for analytics tests; no images on disk."""
    frames = tuple(
        FrameRef(i, t, width, height, f"frames/{i:06d}.png") for i, t in enumerate(frame_times)
    )
    preds = [Detection(t, label, bbox, conf, "prediction") for t, label, bbox, conf in predictions]
    truths = [Detection(t, label, bbox, conf, "ground_truth") for t, label, bbox, conf in ground_truth]
    preds.sort(key=lambda d: d.timestamp)
    truths.sort(key=lambda d: d.timestamp)
    derived = {d.label for d in preds} | {d.label for d in truths}
    return Session(
        frames=frames,
        predictions=tuple(match_detections_to_frames(preds, frames)),
        ground_truth=tuple(match_detections_to_frames(truths, frames)),
        intrinsics=default_intrinsics(width, height),
        vocabulary=frozenset(vocabulary or set()) | frozenset(derived),
    )


@pytest.fixture(scope="session")
def demo_session_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("fixture") / "session"
    synth.demo_session(root, n_frames=30, seed=7)
    return root


@pytest.fixture(scope="session")
def crop_bundle(tmp_path_factory: pytest.TempPathFactory):
    """7 seeded overlapping crops of one scene plus ground-truth homographies."""
    root = tmp_path_factory.mktemp("crops") / "session"
    session, truth = synth.synthetic_crop_session(root, n_frames=7, seed=5, object_path=True)
    return session, truth
