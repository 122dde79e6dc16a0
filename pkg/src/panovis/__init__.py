"""Panoramic-mosaic stitching and timeline analytics for object-detection
outputs on egocentric video."""

from .analytics import (
    classify_detections,
    classify_session,
    distance_series,
    iou,
    poi_events,
    summary_matrix,
)
from .compositor import (
    OverlaySpec,
    Panorama,
    PanoramaParams,
    build_panorama,
    render_overlay,
    transform_detections,
)
from .geometry import Homography, PointPair, dlt_homography, ransac_homography, refine_lm, svd3
from .homfilter import FilterReport, FlipClass, detect_flip, filter_frames, kmeans_elbow
from .ingest import Detection, FrameRef, Intrinsics, Session, load_session, save_session

__version__ = "0.1.0"

__all__ = [
    "Detection",
    "FilterReport",
    "FlipClass",
    "FrameRef",
    "Homography",
    "Intrinsics",
    "OverlaySpec",
    "Panorama",
    "PanoramaParams",
    "PointPair",
    "Session",
    "build_panorama",
    "classify_detections",
    "classify_session",
    "detect_flip",
    "distance_series",
    "dlt_homography",
    "filter_frames",
    "iou",
    "kmeans_elbow",
    "load_session",
    "poi_events",
    "ransac_homography",
    "refine_lm",
    "render_overlay",
    "save_session",
    "summary_matrix",
    "svd3",
    "transform_detections",
]
