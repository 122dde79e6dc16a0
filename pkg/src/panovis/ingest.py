"""Session loading, validation, and detection-to-frame matching.

A session directory looks like::

    frames.json         [{"id": 0, "t": 0.0, "file": "frames/000000.png"}, ...]
    frames/*.png        8-bit RGB images, one per frame, all the same size
    detections.jsonl    {"t": ..., "label": ..., "bbox": [x1,y1,x2,y2], "confidence": ...}
    groundtruth.jsonl   optional, same record shape
    intrinsics.json     optional {"fx","fy","cx","cy","skew"}
    vocabulary.json     optional ["label", ...]

Loading is pure: a returned Session is immutable and safe to share across
threads.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import (
    EmptyFrameList,
    InconsistentFrameDimensions,
    MalformedRecord,
    MissingFile,
    NonMonotoneTimestamps,
)

PREDICTION = "prediction"
GROUND_TRUTH = "ground_truth"


@dataclass(frozen=True)
class FrameRef:
    frame_id: int
    timestamp: float
    width: int
    height: int
    image_path: str


@dataclass(frozen=True)
class Detection:
    """A timestamped labeled box in source-frame pixel coordinates."""

    timestamp: float
    label: str
    bbox: tuple[float, float, float, float]
    confidence: float
    source: str
    matched_frame_id: int | None = None


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self) -> np.ndarray:
        # Closed form for the upper-triangular K; exact up to rounding.
        fx, fy, s, cx, cy = self.fx, self.fy, self.skew, self.cx, self.cy
        return np.array([
            [1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy)],
            [0.0, 1.0 / fy, -cy / fy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class Session:
    """One recording: frames, detection streams, intrinsics, vocabulary."""

    frames: tuple[FrameRef, ...]
    predictions: tuple[Detection, ...]
    ground_truth: tuple[Detection, ...]
    intrinsics: Intrinsics
    vocabulary: frozenset[str]
    root: Path = field(compare=False, default=Path("."))

    @cached_property
    def frames_by_id(self) -> dict[int, FrameRef]:
        return {f.frame_id: f for f in self.frames}

    def frame(self, frame_id: int) -> FrameRef:
        try:
            return self.frames_by_id[frame_id]
        except KeyError:
            raise KeyError(f"no frame with id {frame_id}") from None

    def load_image(self, frame_id: int) -> np.ndarray:
        """Decode the frame as an (H, W, 3) uint8 RGB array."""
        ref = self.frame(frame_id)
        path = self.root / ref.image_path
        if not path.exists():
            raise MissingFile(str(path))
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))


def default_intrinsics(width: int, height: int) -> Intrinsics:
    """Wide-FoV fallback when no calibration is available: fx = fy = width,
    principal point at the image center."""
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    return Intrinsics(fx=float(width), fy=float(width), cx=width / 2.0, cy=height / 2.0)


def session_vocabulary(session: Session) -> frozenset[str]:
    """Union of labels across both detection streams."""
    return frozenset(d.label for d in session.predictions) | frozenset(
        d.label for d in session.ground_truth
    )


def match_detections_to_frames(
    detections: Sequence[Detection], frames: Sequence[FrameRef]
) -> list[Detection]:
    """Assign each detection the frame nearest in time, ties to the earlier frame."""
    if not frames:
        raise EmptyFrameList("cannot match detections against zero frames")
    ts = np.array([f.timestamp for f in frames])
    out = []
    for det in detections:
        pos = int(np.searchsorted(ts, det.timestamp))
        best = min(pos, len(ts) - 1)
        # Walk left through any run of equally-near frames: the earlier
        # frame wins on exact ties, including duplicate timestamps.
        while best > 0 and abs(det.timestamp - ts[best - 1]) <= abs(ts[best] - det.timestamp):
            best -= 1
        out.append(replace(det, matched_frame_id=frames[best].frame_id))
    return out


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingFile(str(path))
    return path


def _parse_detection_line(obj: dict, source: str, path: str, line_no: int) -> Detection:
    try:
        t = float(obj["t"])
        label = obj["label"]
        bbox = obj["bbox"]
        confidence = float(obj.get("confidence", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad detection record: {exc}", path, line_no) from None
    if not isinstance(label, str) or not label:
        raise MalformedRecord("label must be a non-empty string", path, line_no)
    if not (isinstance(bbox, list) and len(bbox) == 4):
        raise MalformedRecord("bbox must be [x1, y1, x2, y2]", path, line_no)
    try:
        x1, y1, x2, y2 = (float(v) for v in bbox)
    except (TypeError, ValueError):
        raise MalformedRecord("bbox entries must be numbers", path, line_no) from None
    if not (x1 < x2 and y1 < y2):
        raise MalformedRecord(f"empty or inverted bbox {bbox}", path, line_no)
    if not 0.0 <= confidence <= 1.0:
        raise MalformedRecord(f"confidence {confidence} outside [0, 1]", path, line_no)
    return Detection(t, label, (x1, y1, x2, y2), confidence, source)


def _load_jsonl(path: Path, source: str) -> list[Detection]:
    records = []
    rel = path.name
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc.msg}", rel, line_no) from None
            if not isinstance(obj, dict):
                raise MalformedRecord("record must be an object", rel, line_no)
            records.append(_parse_detection_line(obj, source, rel, line_no))
    records.sort(key=lambda d: d.timestamp)
    return records


def _load_frames(root: Path) -> list[FrameRef]:
    frames_json = _require(root / "frames.json")
    try:
        entries = json.loads(frames_json.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", "frames.json", exc.lineno) from None
    if not isinstance(entries, list):
        raise MalformedRecord("frames.json must hold an array", "frames.json", 1)
    if not entries:
        raise EmptyFrameList("frames.json lists no frames")

    frames = []
    seen_ids: set[int] = set()
    for i, entry in enumerate(entries, start=1):
        try:
            fid = int(entry["id"])
            t = float(entry["t"])
            file = str(entry["file"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad frame entry: {exc}", "frames.json", i) from None
        if fid < 0:
            raise MalformedRecord(f"negative frame id {fid}", "frames.json", i)
        if fid in seen_ids:
            raise MalformedRecord(f"duplicate frame id {fid}", "frames.json", i)
        seen_ids.add(fid)
        image_path = _require(root / file)
        with Image.open(image_path) as img:
            width, height = img.size
        frames.append(FrameRef(fid, t, width, height, file))

    frames.sort(key=lambda f: f.frame_id)
    dims = {(f.width, f.height) for f in frames}
    if len(dims) > 1:
        raise InconsistentFrameDimensions(f"multiple frame sizes in one session: {sorted(dims)}")
    ts = [f.timestamp for f in frames]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise NonMonotoneTimestamps("frame timestamps decrease with frame id")
    return frames


def load_session(root: str | Path) -> Session:
    """Load and validate a session directory; detection matching is applied."""
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(str(root))
    frames = _load_frames(root)
    _require(root / "frames")

    predictions = _load_jsonl(_require(root / "detections.jsonl"), PREDICTION)
    gt_path = root / "groundtruth.jsonl"
    ground_truth = _load_jsonl(gt_path, GROUND_TRUTH) if gt_path.exists() else []

    intr_path = root / "intrinsics.json"
    if intr_path.exists():
        try:
            obj = json.loads(intr_path.read_text(encoding="utf-8"))
            intrinsics = Intrinsics(
                fx=float(obj["fx"]),
                fy=float(obj["fy"]),
                cx=float(obj["cx"]),
                cy=float(obj["cy"]),
                skew=float(obj.get("skew", 0.0)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad intrinsics: {exc}", "intrinsics.json", 1) from None
        if intrinsics.fx <= 0 or intrinsics.fy <= 0:
            raise MalformedRecord("focal lengths must be positive", "intrinsics.json", 1)
    else:
        intrinsics = default_intrinsics(frames[0].width, frames[0].height)

    derived = frozenset(d.label for d in predictions) | frozenset(d.label for d in ground_truth)
    vocab_path = root / "vocabulary.json"
    if vocab_path.exists():
        try:
            listed = json.loads(vocab_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc.msg}", "vocabulary.json", exc.lineno) from None
        if not (isinstance(listed, list) and all(isinstance(v, str) for v in listed)):
            raise MalformedRecord("vocabulary.json must hold an array of strings", "vocabulary.json", 1)
        # The invariant vocabulary >= observed labels holds by construction.
        vocabulary = frozenset(listed) | derived
    else:
        vocabulary = derived

    return Session(
        frames=tuple(frames),
        predictions=tuple(match_detections_to_frames(predictions, frames)),
        ground_truth=tuple(match_detections_to_frames(ground_truth, frames)),
        intrinsics=intrinsics,
        vocabulary=vocabulary,
        root=root,
    )


def _detection_record(d: Detection) -> dict:
    return {
        "t": d.timestamp,
        "label": d.label,
        "bbox": list(d.bbox),
        "confidence": d.confidence,
    }


def save_session(session: Session, root: str | Path) -> None:
    """Write a session back to disk in the on-disk layout load_session reads.

    Matching metadata is not persisted; it is recomputed on load and is
    deterministic, so load(save(s)) == s.
    """
    root = Path(root)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    entries = []
    for f in session.frames:
        entries.append({"id": f.frame_id, "t": f.timestamp, "file": f.image_path})
        src = session.root / f.image_path
        dst = root / f.image_path
        if src.resolve() != dst.resolve():
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dst)
    (root / "frames.json").write_text(json.dumps(entries, indent=1), encoding="utf-8")
    _write_jsonl(root / "detections.jsonl", session.predictions)
    _write_jsonl(root / "groundtruth.jsonl", session.ground_truth)
    intr = session.intrinsics
    (root / "intrinsics.json").write_text(
        json.dumps({"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy, "skew": intr.skew}),
        encoding="utf-8",
    )
    (root / "vocabulary.json").write_text(
        json.dumps(sorted(session.vocabulary)), encoding="utf-8"
    )


def _write_jsonl(path: Path, records: Iterable[Detection]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in records:
            fh.write(json.dumps(_detection_record(d)) + "\n")
