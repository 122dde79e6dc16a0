"""Timeline analytics over detection streams and panorama-space tracks.

All computations are pure functions of an immutable session (plus, for the
distance products, detections transformed into one panorama's canvas).
True negatives are counted against the session vocabulary: a label scores a
TN in a frame when it appears in neither stream there. That rule is a
documented choice; open-vocabulary detection has no canonical TN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from .ingest import Detection, Session

if TYPE_CHECKING:
    from .compositor import TransformedDetection

METRIC_CONFIDENCE = "confidence"
METRIC_IOU = "iou"

EVENT_NEW = "NewLabel"
EVENT_DUPLICATE = "DuplicateLabel"
EVENT_MISSING = "MissingLabel"


@dataclass(frozen=True)
class TimelineMatrix:
    metric: str
    labels: tuple[str, ...]
    frame_ids: tuple[int, ...]
    values: tuple[tuple[float | None, ...], ...]  # rows = labels, cols = frames


@dataclass(frozen=True)
class ClassificationCounts:
    frame_id: int
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class ArrowChain:
    label: str
    chain_id: int
    nodes: tuple[tuple[int, tuple[float, float]], ...]  # (frame_id, centroid)


@dataclass(frozen=True)
class DistanceStep:
    from_frame_id: int
    to_frame_id: int
    distance: float
    chain_id: int


@dataclass(frozen=True)
class DistanceSeries:
    label: str
    steps: tuple[DistanceStep, ...]


@dataclass(frozen=True)
class POIEvent:
    kind: str
    frame_id: int
    label: str
    detail: str


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes; 0 when disjoint."""
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    if not (ax1 < ax2 and ay1 < ay2 and bx1 < bx2 and by1 < by2):
        raise ValueError("boxes must satisfy x1 < x2 and y1 < y2")
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def _by_frame(detections: Iterable[Detection]) -> dict[int, list[Detection]]:
    grouped: dict[int, list[Detection]] = {}
    for d in detections:
        grouped.setdefault(d.matched_frame_id, []).append(d)
    return grouped


def _labels_by_first_appearance(session: Session) -> list[str]:
    first: dict[str, tuple[float, str]] = {}
    for d in list(session.predictions) + list(session.ground_truth):
        key = (d.timestamp, d.label)
        if d.label not in first or key < first[d.label]:
            first[d.label] = key
    return [label for label, _ in sorted(first.items(), key=lambda kv: kv[1])]


def summary_matrix(session: Session, metric: str = METRIC_CONFIDENCE) -> TimelineMatrix:
    """Per (label, frame) cell: max prediction confidence, or max IoU between
    same-label prediction/truth pairs. Cells with no data stay absent (None)."""
    if metric not in (METRIC_CONFIDENCE, METRIC_IOU):
        raise ValueError(f"unknown metric '{metric}'")
    labels = _labels_by_first_appearance(session)
    frame_ids = [f.frame_id for f in session.frames]
    preds = _by_frame(session.predictions)
    truths = _by_frame(session.ground_truth)

    rows = []
    for label in labels:
        row: list[float | None] = []
        for fid in frame_ids:
            ps = [d for d in preds.get(fid, ()) if d.label == label]
            if metric == METRIC_CONFIDENCE:
                row.append(max((d.confidence for d in ps), default=None))
            else:
                ts = [d for d in truths.get(fid, ()) if d.label == label]
                if ps and ts:
                    row.append(max(iou(p.bbox, t.bbox) for p in ps for t in ts))
                else:
                    row.append(None)
        rows.append(tuple(row))
    return TimelineMatrix(metric, tuple(labels), tuple(frame_ids), tuple(rows))


def classify_detections(
    predictions: Sequence[Detection],
    truths: Sequence[Detection],
    iou_threshold: float = 0.5,
    vocabulary: Iterable[str] = (),
    frame_id: int = -1,
) -> ClassificationCounts:
    """Greedy max-IoU-first matching of one frame's predictions to truths.

    Matched same-label pairs with IoU >= threshold count as TP; leftover
    predictions are FP and leftover truths FN. TN counts vocabulary labels
    absent from both streams in this frame.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must be in (0, 1)")
    candidates = []
    for pi, p in enumerate(predictions):
        for ti, t in enumerate(truths):
            if p.label != t.label:
                continue
            overlap = iou(p.bbox, t.bbox)
            if overlap >= iou_threshold:
                candidates.append((-overlap, pi, ti))
    candidates.sort()
    used_p: set[int] = set()
    used_t: set[int] = set()
    for _, pi, ti in candidates:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
    tp = len(used_p)
    fp = len(predictions) - tp
    fn = len(truths) - tp
    present = {d.label for d in predictions} | {d.label for d in truths}
    tn = len(set(vocabulary) - present)
    return ClassificationCounts(frame_id, tp, fp, fn, tn)


def classify_session(session: Session, iou_threshold: float = 0.5) -> list[ClassificationCounts]:
    preds = _by_frame(session.predictions)
    truths = _by_frame(session.ground_truth)
    return [
        classify_detections(
            preds.get(f.frame_id, ()),
            truths.get(f.frame_id, ()),
            iou_threshold,
            session.vocabulary,
            f.frame_id,
        )
        for f in session.frames
    ]


def arrow_chains(transformed: Sequence["TransformedDetection"]) -> list[ArrowChain]:
    """Group one label's panorama-space detections into movement chains.

    Worked frame by frame in time order: each frame's instances greedily
    attach to distinct existing chains by ascending distance to the chain's
    last node (ties by instance then chain index); surplus instances start
    new chains.
    """
    if not transformed:
        return []
    labels = {t.detection.label for t in transformed}
    if len(labels) > 1:
        raise ValueError(f"arrow_chains expects a single label, got {sorted(labels)}")
    label = labels.pop()

    chains: list[list[tuple[int, tuple[float, float]]]] = []
    idx = 0
    while idx < len(transformed):
        fid = transformed[idx].detection.matched_frame_id
        group = []
        while idx < len(transformed) and transformed[idx].detection.matched_frame_id == fid:
            group.append(transformed[idx])
            idx += 1
        if not chains:
            for inst in group:
                chains.append([(fid, tuple(inst.centroid))])
            continue
        ranked = sorted(
            (
                (math.dist(inst.centroid, chains[j][-1][1]), i, j)
                for i, inst in enumerate(group)
                for j in range(len(chains))
            )
        )
        taken_inst: set[int] = set()
        taken_chain: set[int] = set()
        for _, i, j in ranked:
            if i in taken_inst or j in taken_chain:
                continue
            taken_inst.add(i)
            taken_chain.add(j)
            chains[j].append((fid, tuple(group[i].centroid)))
        for i, inst in enumerate(group):
            if i not in taken_inst:
                chains.append([(fid, tuple(inst.centroid))])
    return [ArrowChain(label, cid, tuple(nodes)) for cid, nodes in enumerate(chains)]


def distance_series(chains: Sequence[ArrowChain]) -> list[DistanceSeries]:
    """Per label: consecutive-centroid distances, concatenated across that
    label's chains with each step tagged by its chain id."""
    by_label: dict[str, list[ArrowChain]] = {}
    for chain in chains:
        by_label.setdefault(chain.label, []).append(chain)
    out = []
    for label in sorted(by_label):
        steps = []
        for chain in sorted(by_label[label], key=lambda c: c.chain_id):
            for (f_a, c_a), (f_b, c_b) in zip(chain.nodes, chain.nodes[1:]):
                steps.append(DistanceStep(f_a, f_b, math.dist(c_a, c_b), chain.chain_id))
        out.append(DistanceSeries(label, tuple(steps)))
    return out


def poi_events(session: Session, missing_threshold: int = 15) -> list[POIEvent]:
    """Annotated-slider tick marks: first appearance of a label, frames with
    duplicate instances, and absence streaks reaching ``missing_threshold``
    frames (re-armed once the label shows up again)."""
    if missing_threshold < 1:
        raise ValueError("missing_threshold must be >= 1")
    preds = _by_frame(session.predictions)
    seen: set[str] = set()
    absent_for: dict[str, int] = {}
    armed: dict[str, bool] = {}
    events: list[POIEvent] = []
    for frame in session.frames:
        counts: dict[str, int] = {}
        for d in preds.get(frame.frame_id, ()):
            counts[d.label] = counts.get(d.label, 0) + 1
        for label in sorted(counts):
            if label not in seen:
                seen.add(label)
                armed[label] = True
                events.append(POIEvent(EVENT_NEW, frame.frame_id, label, "first predicted appearance"))
        for label in sorted(counts):
            if counts[label] >= 2:
                events.append(POIEvent(EVENT_DUPLICATE, frame.frame_id, label, str(counts[label])))
        for label in sorted(seen):
            if label in counts:
                absent_for[label] = 0
                armed[label] = True
            else:
                absent_for[label] = absent_for.get(label, 0) + 1
                if armed.get(label) and absent_for[label] >= missing_threshold:
                    events.append(
                        POIEvent(
                            EVENT_MISSING,
                            frame.frame_id,
                            label,
                            f"not detected for {missing_threshold} frames",
                        )
                    )
                    armed[label] = False
    return events
