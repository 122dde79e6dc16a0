from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from panovis.errors import (
    EmptyFrameList,
    InconsistentFrameDimensions,
    MalformedRecord,
    MissingFile,
    NonMonotoneTimestamps,
)
from panovis.ingest import (
    Detection,
    FrameRef,
    default_intrinsics,
    load_session,
    match_detections_to_frames,
    save_session,
    session_vocabulary,
)


def write_minimal_session(
    root: Path,
    times: list[float],
    detections: list[dict] | None = None,
    groundtruth: list[dict] | None = None,
    size: tuple[int, int] = (40, 30),
    sizes: list[tuple[int, int]] | None = None,
) -> Path:
    (root / "frames").mkdir(parents=True)
    entries = []
    for i, t in enumerate(times):
        w, h = sizes[i] if sizes else size
        img = np.full((h, w, 3), 40 + 13 * i, dtype=np.uint8)
        rel = f"frames/{i:06d}.png"
        Image.fromarray(img).save(root / rel)
        entries.append({"id": i, "t": t, "file": rel})
    (root / "frames.json").write_text(json.dumps(entries))
    with open(root / "detections.jsonl", "w") as fh:
        for rec in detections or []:
            fh.write(json.dumps(rec) + "\n")
    if groundtruth is not None:
        with open(root / "groundtruth.jsonl", "w") as fh:
            for rec in groundtruth:
                fh.write(json.dumps(rec) + "\n")
    return root


class TestLoadSession:
    def test_empty_streams_give_empty_vocabulary(self, tmp_path):
        root = write_minimal_session(tmp_path / "s", [0.0, 0.5, 1.0])
        session = load_session(root)
        assert len(session.frames) == 3
        assert session.predictions == ()
        assert session.ground_truth == ()
        assert session.vocabulary == frozenset()

    def test_inverted_bbox_names_offending_line(self, tmp_path):
        root = write_minimal_session(
            tmp_path / "s",
            [0.0],
            detections=[
                {"t": 0.0, "label": "mug", "bbox": [0, 0, 5, 5], "confidence": 0.5},
                {"t": 0.0, "label": "mug", "bbox": [7, 0, 5, 5], "confidence": 0.5},
            ],
        )
        with pytest.raises(MalformedRecord) as err:
            load_session(root)
        assert err.value.line == 2
        assert "detections.jsonl" in str(err.value)

    def test_nearest_frame_matching_applied(self, tmp_path):
        root = write_minimal_session(
            tmp_path / "s",
            [0.0, 0.5, 1.0],
            detections=[{"t": 0.6, "label": "mug", "bbox": [0, 0, 5, 5], "confidence": 0.9}],
        )
        session = load_session(root)
        assert session.predictions[0].matched_frame_id == 1  # frame at t=0.5

    def test_missing_required_files(self, tmp_path):
        root = tmp_path / "s"
        root.mkdir()
        with pytest.raises(MissingFile):
            load_session(root)
        write_minimal_session(tmp_path / "s2", [0.0])
        (tmp_path / "s2" / "detections.jsonl").unlink()
        with pytest.raises(MissingFile):
            load_session(tmp_path / "s2")

    def test_inconsistent_dimensions_rejected(self, tmp_path):
        root = write_minimal_session(tmp_path / "s", [0.0, 1.0], sizes=[(40, 30), (42, 30)])
        with pytest.raises(InconsistentFrameDimensions):
            load_session(root)

    def test_decreasing_timestamps_rejected(self, tmp_path):
        root = write_minimal_session(tmp_path / "s", [1.0, 0.5])
        with pytest.raises(NonMonotoneTimestamps):
            load_session(root)

    def test_no_frames_rejected(self, tmp_path):
        root = tmp_path / "s"
        (root / "frames").mkdir(parents=True)
        (root / "frames.json").write_text("[]")
        (root / "detections.jsonl").write_text("")
        with pytest.raises(EmptyFrameList):
            load_session(root)

    def test_detections_sorted_on_load(self, tmp_path):
        root = write_minimal_session(
            tmp_path / "s",
            [0.0, 1.0],
            detections=[
                {"t": 0.9, "label": "b", "bbox": [0, 0, 5, 5], "confidence": 0.5},
                {"t": 0.1, "label": "a", "bbox": [0, 0, 5, 5], "confidence": 0.5},
            ],
        )
        session = load_session(root)
        assert [d.label for d in session.predictions] == ["a", "b"]

    def test_explicit_vocabulary_is_extended_with_observed_labels(self, tmp_path):
        root = write_minimal_session(
            tmp_path / "s",
            [0.0],
            detections=[{"t": 0.0, "label": "mug", "bbox": [0, 0, 5, 5], "confidence": 0.5}],
        )
        (root / "vocabulary.json").write_text(json.dumps(["knife"]))
        session = load_session(root)
        assert session.vocabulary == frozenset({"knife", "mug"})

    def test_round_trip(self, tmp_path):
        root = write_minimal_session(
            tmp_path / "s",
            [0.0, 0.5, 1.0],
            detections=[{"t": 0.6, "label": "mug", "bbox": [1, 2, 5, 6], "confidence": 0.9}],
            groundtruth=[{"t": 0.4, "label": "mug", "bbox": [1, 2, 5, 7], "confidence": 1.0}],
        )
        session = load_session(root)
        save_session(session, tmp_path / "copy")
        assert load_session(tmp_path / "copy") == session


class TestMatching:
    def frames(self, times: list[float]) -> list[FrameRef]:
        return [FrameRef(i, t, 10, 10, f"frames/{i}.png") for i, t in enumerate(times)]

    def det(self, t: float) -> Detection:
        return Detection(t, "x", (0.0, 0.0, 1.0, 1.0), 0.5, "prediction")

    def test_exact_hit(self):
        frames = self.frames([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
        (matched,) = match_detections_to_frames([self.det(0.7)], frames)
        assert matched.matched_frame_id == 7

    def test_equidistant_tie_goes_to_earlier_frame(self):
        frames = self.frames([0.0, 1.0, 2.0, 3.0])
        (matched,) = match_detections_to_frames([self.det(2.5)], frames)
        assert matched.matched_frame_id == 2

    def test_empty_frames_rejected(self):
        with pytest.raises(EmptyFrameList):
            match_detections_to_frames([self.det(0.0)], [])

    @given(
        frame_times=st.lists(
            st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=40
        ),
        det_times=st.lists(
            st.floats(min_value=-10, max_value=110, allow_nan=False), min_size=1, max_size=50
        ),
    )
    def test_matches_brute_force_oracle(self, frame_times, det_times):
        frames = self.frames(sorted(frame_times))
        detections = [self.det(t) for t in det_times]
        matched = match_detections_to_frames(detections, frames)
        for d, m in zip(detections, matched):
            # independent O(n*m) scan with the earlier-frame tie rule
            best = min(frames, key=lambda f: (abs(f.timestamp - d.timestamp), f.frame_id))
            assert m.matched_frame_id == best.frame_id

    @given(
        frame_times=st.lists(
            st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=30
        ),
        t=st.floats(min_value=-10, max_value=110, allow_nan=False),
    )
    def test_matching_minimality(self, frame_times, t):
        frames = self.frames(sorted(frame_times))
        (m,) = match_detections_to_frames([self.det(t)], frames)
        chosen = next(f for f in frames if f.frame_id == m.matched_frame_id)
        for f in frames:
            assert abs(chosen.timestamp - t) <= abs(f.timestamp - t)


class TestDefaults:
    def test_default_intrinsics_formula(self):
        k = default_intrinsics(760, 428)
        assert (k.fx, k.fy, k.cx, k.cy, k.skew) == (760.0, 760.0, 380.0, 214.0, 0.0)

    def test_tiny_image(self):
        k = default_intrinsics(2, 2)
        assert (k.fx, k.fy, k.cx, k.cy) == (2.0, 2.0, 1.0, 1.0)

    def test_nonpositive_dimensions_rejected(self):
        with pytest.raises(ValueError):
            default_intrinsics(0, 10)

    def test_intrinsics_inverse_is_exact(self):
        k = default_intrinsics(760, 428)
        assert np.allclose(k.matrix() @ k.inverse_matrix(), np.eye(3), atol=1e-14)


class TestVocabulary:
    def test_union_of_streams(self):
        from conftest import make_session

        s = make_session(
            [0.0, 1.0],
            predictions=[(0.0, "mug", (0, 0, 5, 5), 0.9)],
            ground_truth=[(0.0, "mug", (0, 0, 5, 5), 1.0), (1.0, "knife", (0, 0, 5, 5), 1.0)],
        )
        assert session_vocabulary(s) == frozenset({"mug", "knife"})

    def test_empty(self):
        from conftest import make_session

        assert session_vocabulary(make_session([0.0])) == frozenset()

    @given(labels=st.lists(st.sampled_from("abcdefgh"), min_size=0, max_size=60))
    def test_distinct_count_oracle(self, labels):
        from conftest import make_session

        s = make_session(
            [0.0],
            predictions=[(0.0, lab, (0, 0, 1, 1), 0.5) for lab in labels],
        )
        assert len(session_vocabulary(s)) == len(set(labels))
