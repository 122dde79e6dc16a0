"""Machine-readable export documents and raster encoding.

The two document shapes produced here (placement report and analytics
bundle) are pinned by JSON schemas shipped under ``panovis/schemas`` and
are what the CLI writes and the HTTP service serves. Serialization is
deterministic: stable key order, no sets, and floats straight from the
computation.
"""

from __future__ import annotations

import io
import json
from typing import Sequence

import numpy as np
from PIL import Image

from . import analytics
from .compositor import (
    INCLUDED,
    Panorama,
    Placement,
    TransformedDetection,
    transform_detection,
    transform_detections,
)
from .geometry import Homography
from .homfilter import Clustering
from .ingest import Session


def encode_png(rgba: np.ndarray) -> bytes:
    """Deterministic PNG bytes for an (H, W, 3|4) uint8 array."""
    mode = "RGBA" if rgba.shape[2] == 4 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(rgba, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _quad_json(quad: np.ndarray | None) -> list[list[float]] | None:
    if quad is None:
        return None
    return [[float(x), float(y)] for x, y in quad]


def _clustering_json(clustering: Clustering | None) -> dict | None:
    if clustering is None:
        return None
    return {
        "k": clustering.k,
        "centroids": [[c[0], c[1]] for c in clustering.centroids],
        "assignment": {str(fid): idx for fid, idx in sorted(clustering.assignment.items())},
        "wss_by_k": {str(k): v for k, v in sorted(clustering.wss_by_k.items())},
    }


def panorama_report(panorama: Panorama) -> dict:
    """Placements plus the filter report, ready for JSON export."""
    report = panorama.filter_report
    return {
        "canvas": {"width": panorama.canvas_width, "height": panorama.canvas_height},
        "offset": [panorama.offset[0], panorama.offset[1]],
        "base_frame_id": panorama.base_frame_id,
        "frame_size": [panorama.frame_width, panorama.frame_height],
        "params": panorama.params.to_dict(),
        "placements": [
            {
                "frame_id": p.frame_id,
                "status": p.status,
                "reason": p.reason,
                "homography": p.homography.as_flat() if p.homography is not None else None,
                "quad": _quad_json(p.quad),
            }
            for p in panorama.placements
        ],
        "filter": {
            "kept": list(report.kept),
            "removed": [{"frame_id": fid, "reason": reason} for fid, reason in report.removed],
            "clustering": _clustering_json(report.clustering),
            "base_guard_applied": report.base_guard_applied,
            "reference": [report.reference[0], report.reference[1]],
        },
    }


def matrix_json(matrix: analytics.TimelineMatrix) -> dict:
    return {
        "metric": matrix.metric,
        "labels": list(matrix.labels),
        "frame_ids": list(matrix.frame_ids),
        "values": [list(row) for row in matrix.values],
    }


def series_json(series: Sequence[analytics.DistanceSeries]) -> list[dict]:
    return [
        {
            "label": s.label,
            "steps": [
                {
                    "from_frame_id": step.from_frame_id,
                    "to_frame_id": step.to_frame_id,
                    "distance": step.distance,
                    "chain_id": step.chain_id,
                }
                for step in s.steps
            ],
        }
        for s in series
    ]


def _chains_per_label(transformed: Sequence[TransformedDetection]) -> list[analytics.ArrowChain]:
    by_label: dict[str, list[TransformedDetection]] = {}
    for t in transformed:
        by_label.setdefault(t.detection.label, []).append(t)
    chains: list[analytics.ArrowChain] = []
    for label in sorted(by_label):
        chains.extend(analytics.arrow_chains(by_label[label]))
    return chains


def panorama_distance_series(
    panorama: Panorama, session: Session
) -> list[analytics.DistanceSeries]:
    """Distance series of prediction centroids adjusted into the panorama."""
    transformed = transform_detections(panorama, session.predictions)
    return analytics.distance_series(_chains_per_label(transformed))


def report_distance_series(report: dict, session: Session) -> list[analytics.DistanceSeries]:
    """Distance series recomputed from an exported placement report.

    Lets the analytics command consume a previous stitch run's
    ``panorama.json`` without rebuilding the mosaic.
    """
    offset = (float(report["offset"][0]), float(report["offset"][1]))
    placements: dict[int, Placement] = {}
    for entry in report["placements"]:
        if entry["status"] != INCLUDED or entry["homography"] is None:
            continue
        h = Homography.from_matrix(np.array(entry["homography"], dtype=np.float64).reshape(3, 3))
        placements[int(entry["frame_id"])] = Placement(int(entry["frame_id"]), h, None, INCLUDED)
    transformed = [
        transform_detection(d, placements[d.matched_frame_id], offset)
        for d in session.predictions
        if d.matched_frame_id in placements
    ]
    return analytics.distance_series(_chains_per_label(transformed))


def analytics_document(
    session: Session,
    iou_threshold: float = 0.5,
    missing_threshold: int = 15,
    panorama: Panorama | None = None,
    panorama_id: str | None = None,
) -> dict:
    """The full analytics bundle: summary matrices for both metrics,
    per-frame classification counts, POI events, and (given a panorama)
    the distance series keyed by its id."""
    doc = {
        "iou_threshold": iou_threshold,
        "missing_threshold": missing_threshold,
        "vocabulary": sorted(session.vocabulary),
        "summary": {
            "confidence": matrix_json(analytics.summary_matrix(session, analytics.METRIC_CONFIDENCE)),
            "iou": matrix_json(analytics.summary_matrix(session, analytics.METRIC_IOU)),
        },
        "classification": [
            {"frame_id": c.frame_id, "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
            for c in analytics.classify_session(session, iou_threshold)
        ],
        "events": [
            {"kind": e.kind, "frame_id": e.frame_id, "label": e.label, "detail": e.detail}
            for e in analytics.poi_events(session, missing_threshold)
        ],
        "distance": None,
    }
    if panorama is not None:
        doc["distance"] = {
            "panorama_id": panorama_id,
            "series": series_json(panorama_distance_series(panorama, session)),
        }
    return doc


def dump_json(document: dict) -> str:
    return json.dumps(document, indent=1, sort_keys=True, allow_nan=False) + "\n"
