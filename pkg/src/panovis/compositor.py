"""Panorama planning, warping, compositing, and overlay rendering.

The pipeline projects every selected frame onto the base frame's plane,
drops defective alignments, plans a canvas that bounds all surviving corner
quads, inverse-warps each frame with bilinear sampling, and source-over
composites in temporal order (later frames on top). Detection overlays are
drawn on an independent transparent raster so changing visualization
options never rebuilds the panorama.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from . import analytics
from .errors import (
    AllFramesExcluded,
    BaseFrameUnstitchable,
    CanvasTooLarge,
    DegenerateConfiguration,
    DetectionOnExcludedFrame,
    InsufficientPairs,
    InvalidRange,
    MissingFile,
    NoModelFound,
    PointAtInfinity,
    SingularNormalEquations,
    UnknownLabelColor,
)
from .features import DetectorParams, detect_and_describe, lowe_ratio_filter, match_descriptors
from .geometry import (
    Homography,
    PointPair,
    project_corners,
    ransac_homography,
    refine_lm,
)
from .homfilter import ORIGIN_REFERENCE, FilterReport, filter_frames
from .ingest import Detection, Session

INCLUDED = "included"
EXCLUDED = "excluded"

REASON_TOO_FEW_MATCHES = "TooFewMatches"
REASON_NO_MODEL = "NoModelFound"
REASON_UNREADABLE = "UnreadableImage"

MAX_CANVAS_PIXELS = 64_000_000

STYLE_BOXES = "boxes"
STYLE_CENTROIDS = "centroids"
STYLE_ARROWS = "arrows"
OVERLAY_STYLES = (STYLE_BOXES, STYLE_CENTROIDS, STYLE_ARROWS)

# 12 saturated, deliberately unnatural mark colors, assigned to labels in
# order of first appearance; the palette cycles (with a warning) past 12.
DEFAULT_PALETTE: tuple[tuple[int, int, int], ...] = (
    (255, 0, 0), (255, 128, 0), (255, 255, 0), (128, 255, 0),
    (0, 255, 0), (0, 255, 128), (0, 255, 255), (0, 128, 255),
    (0, 0, 255), (128, 0, 255), (255, 0, 255), (255, 0, 128),
)
HIGHLIGHT_COLOR = (255, 255, 255)


@dataclass(frozen=True)
class PanoramaParams:
    """Everything that determines a panorama build, and nothing else."""

    frame_range: tuple[int, int]
    base_frame_id: int | None = None
    detector_kind: str = "orb"
    lowe_ratio: float = 0.75
    ransac_thresh: float = 3.0
    alpha: float = 1.0
    stretch_filter: bool = True
    flip_filter: bool = True
    seed: int = 0
    sample_stride: int = 1
    max_features: int = 1500
    ransac_confidence: float = 0.995
    ransac_max_iters: int = 2000
    k_max: int = 8
    stretch_reference: tuple[float, float] = ORIGIN_REFERENCE

    def validate(self) -> None:
        start, end = self.frame_range
        if start > end:
            raise InvalidRange(f"range {start}:{end} is empty")
        if self.sample_stride < 1:
            raise InvalidRange("sample_stride must be >= 1")
        if not 0.0 < self.lowe_ratio < 1.0:
            raise InvalidRange("lowe_ratio must be in (0, 1)")
        if self.ransac_thresh <= 0:
            raise InvalidRange("ransac_thresh must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidRange("alpha must be in (0, 1]")
        if self.k_max < 1:
            raise InvalidRange("k_max must be >= 1")

    def to_dict(self) -> dict:
        return {
            "frame_range": list(self.frame_range),
            "base_frame_id": self.base_frame_id,
            "detector_kind": self.detector_kind,
            "lowe_ratio": self.lowe_ratio,
            "ransac_thresh": self.ransac_thresh,
            "alpha": self.alpha,
            "stretch_filter": self.stretch_filter,
            "flip_filter": self.flip_filter,
            "seed": self.seed,
            "sample_stride": self.sample_stride,
            "max_features": self.max_features,
            "ransac_confidence": self.ransac_confidence,
            "ransac_max_iters": self.ransac_max_iters,
            "k_max": self.k_max,
            "stretch_reference": list(self.stretch_reference),
        }


@dataclass(frozen=True)
class OverlaySpec:
    style: str = STYLE_BOXES
    min_confidence: float = 0.0
    label_filter: frozenset[str] | None = None
    highlighted_frame: int | None = None

    def validate(self) -> None:
        if self.style not in OVERLAY_STYLES:
            raise ValueError(f"style must be one of {OVERLAY_STYLES}")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must be in [0, 1]")


@dataclass(frozen=True, eq=False)
class Placement:
    frame_id: int
    homography: Homography | None
    quad: np.ndarray | None  # (4, 2) canvas coordinates, clockwise from top-left
    status: str
    reason: str | None = None

    @property
    def included(self) -> bool:
        return self.status == INCLUDED


@dataclass(frozen=True, eq=False)
class Panorama:
    canvas_width: int
    canvas_height: int
    offset: tuple[float, float]
    placements: tuple[Placement, ...]
    image: np.ndarray  # (H, W, 4) uint8 RGBA
    base_frame_id: int
    frame_width: int
    frame_height: int
    filter_report: FilterReport
    params: PanoramaParams

    def placement(self, frame_id: int) -> Placement:
        for p in self.placements:
            if p.frame_id == frame_id:
                return p
        raise KeyError(f"frame {frame_id} is not part of this panorama")


@dataclass(frozen=True, eq=False)
class TransformedDetection:
    detection: Detection
    quad: np.ndarray  # (4, 2) projected bbox corners in canvas coordinates
    centroid: tuple[float, float]


def select_frame_ids(session: Session, params: PanoramaParams) -> tuple[list[int], int]:
    """Resolve the strided frame-id selection and the base frame id."""
    params.validate()
    start, end = params.frame_range
    in_range = [f.frame_id for f in session.frames if start <= f.frame_id <= end]
    if not in_range:
        raise InvalidRange(f"no session frames inside range {start}:{end}")
    selected = in_range[:: params.sample_stride]
    if params.base_frame_id is None:
        base = selected[len(selected) // 2]
    else:
        base = params.base_frame_id
        if base not in selected:
            raise InvalidRange(
                f"base frame {base} is not in the selected range after striding"
            )
    return selected, base


def plan_layout(
    homographies: Sequence[Homography], width: int, height: int
) -> tuple[int, int, tuple[float, float]]:
    """Canvas size and offset bounding every projected frame quad.

    The offset shifts the minimum projected corner to (0, 0); canvas area is
    capped to keep a runaway homography from exhausting memory.
    """
    if not homographies:
        raise ValueError("plan_layout needs at least one included frame")
    corners = np.vstack([project_corners(h, width, height) for h in homographies])
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    canvas_w = max(1, math.ceil(hi[0] - lo[0]))
    canvas_h = max(1, math.ceil(hi[1] - lo[1]))
    if canvas_w * canvas_h > MAX_CANVAS_PIXELS:
        raise CanvasTooLarge(f"{canvas_w}x{canvas_h} exceeds {MAX_CANVAS_PIXELS} pixels")
    return canvas_w, canvas_h, (float(0.0 - lo[0]), float(0.0 - lo[1]))


def warp_frame(
    image: np.ndarray,
    H: Homography,
    canvas_width: int,
    canvas_height: int,
    alpha: float = 1.0,
) -> tuple[np.ndarray, tuple[int, int]] | None:
    """Inverse-map the frame onto the canvas with bilinear sampling.

    ``H`` maps source pixels to canvas pixels. Returns an RGBA tile plus its
    (x0, y0) anchor, or None when the projected quad misses the canvas.
    Pixels whose inverse image falls outside the source are transparent;
    covered pixels carry alpha = round(255 * alpha).
    """
    src_h, src_w = image.shape[:2]
    quad = project_corners(H, src_w, src_h)
    x0 = max(0, math.floor(quad[:, 0].min()))
    y0 = max(0, math.floor(quad[:, 1].min()))
    x1 = min(canvas_width, math.ceil(quad[:, 0].max()) + 1)
    y1 = min(canvas_height, math.ceil(quad[:, 1].max()) + 1)
    if x0 >= x1 or y0 >= y1:
        return None

    hinv = np.linalg.inv(H.m)
    xs = np.arange(x0, x1, dtype=np.float64)
    ys = np.arange(y0, y1, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    denom = hinv[2, 0] * gx + hinv[2, 1] * gy + hinv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (hinv[0, 0] * gx + hinv[0, 1] * gy + hinv[0, 2]) / denom
        v = (hinv[1, 0] * gx + hinv[1, 1] * gy + hinv[1, 2]) / denom
    valid = (
        np.isfinite(u)
        & np.isfinite(v)
        & (np.abs(denom) > 1e-12)
        & (u >= 0.0)
        & (u <= src_w - 1.0)
        & (v >= 0.0)
        & (v <= src_h - 1.0)
    )

    u = np.where(valid, u, 0.0)
    v = np.where(valid, v, 0.0)
    u0 = np.clip(np.floor(u).astype(np.intp), 0, src_w - 2) if src_w > 1 else np.zeros_like(u, dtype=np.intp)
    v0 = np.clip(np.floor(v).astype(np.intp), 0, src_h - 2) if src_h > 1 else np.zeros_like(v, dtype=np.intp)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    src = image[..., :3].astype(np.float64)
    u1 = np.minimum(u0 + 1, src_w - 1)
    v1 = np.minimum(v0 + 1, src_h - 1)
    sampled = (
        src[v0, u0] * (1 - fu) * (1 - fv)
        + src[v0, u1] * fu * (1 - fv)
        + src[v1, u0] * (1 - fu) * fv
        + src[v1, u1] * fu * fv
    )
    tile = np.zeros((y1 - y0, x1 - x0, 4), dtype=np.uint8)
    tile[..., :3] = np.where(valid[..., None], np.rint(sampled), 0).astype(np.uint8)
    tile[..., 3] = np.where(valid, int(round(255 * alpha)), 0).astype(np.uint8)
    return tile, (x0, y0)


def _blend_tile(
    acc_rgb: np.ndarray, acc_a: np.ndarray, tile: np.ndarray, x0: int, y0: int
) -> None:
    """Source-over blend one straight-alpha tile into premultiplied buffers."""
    h, w = tile.shape[:2]
    a_s = tile[..., 3].astype(np.float64) / 255.0
    rgb_s = tile[..., :3].astype(np.float64) / 255.0 * a_s[..., None]
    view_rgb = acc_rgb[y0 : y0 + h, x0 : x0 + w]
    view_a = acc_a[y0 : y0 + h, x0 : x0 + w]
    view_rgb *= (1.0 - a_s)[..., None]
    view_rgb += rgb_s
    view_a *= 1.0 - a_s
    view_a += a_s


def _finalize_canvas(acc_rgb: np.ndarray, acc_a: np.ndarray) -> np.ndarray:
    out = np.zeros(acc_rgb.shape[:2] + (4,), dtype=np.uint8)
    covered = acc_a > 0
    straight = np.zeros_like(acc_rgb)
    straight[covered] = acc_rgb[covered] / acc_a[covered, None]
    out[..., :3] = np.rint(np.clip(straight, 0.0, 1.0) * 255.0).astype(np.uint8)
    out[..., 3] = np.rint(np.clip(acc_a, 0.0, 1.0) * 255.0).astype(np.uint8)
    return out


def composite(tiles: Sequence[np.ndarray]) -> np.ndarray:
    """Source-over composite of equally-sized RGBA rasters, first to last
    (later tiles land on top). The background stays fully transparent."""
    if not tiles:
        raise ValueError("composite needs at least one tile")
    shape = tiles[0].shape
    for t in tiles:
        if t.shape != shape:
            raise ValueError("tiles must share canvas dimensions")
    acc_rgb = np.zeros(shape[:2] + (3,), dtype=np.float64)
    acc_a = np.zeros(shape[:2], dtype=np.float64)
    for t in tiles:
        _blend_tile(acc_rgb, acc_a, t, 0, 0)
    return _finalize_canvas(acc_rgb, acc_a)


def _frame_seed(seed: int, frame_id: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(frame_id,)).generate_state(1)[0])


def build_panorama(session: Session, params: PanoramaParams) -> Panorama:
    """Run the full stitching pipeline for the selected frame range.

    Per non-base frame: detect features, brute-force match against the base,
    ratio-filter, RANSAC a homography, and polish it. Survivors then pass
    through flip and stretch filtering before layout and compositing.
    Deterministic for a fixed seed.
    """
    selected, base_id = select_frame_ids(session, params)
    frame0 = session.frame(selected[0])
    width, height = frame0.width, frame0.height

    try:
        base_image = session.load_image(base_id)
    except (MissingFile, OSError) as exc:
        raise BaseFrameUnstitchable(f"cannot read base frame {base_id}: {exc}") from exc
    detector_params = DetectorParams()
    base_features = detect_and_describe(
        base_image, params.detector_kind, detector_params, params.max_features, base_id
    )

    images: dict[int, np.ndarray] = {base_id: base_image}
    homographies: dict[int, Homography] = {base_id: Homography.identity()}
    failures: dict[int, str] = {}
    for fid in selected:
        if fid == base_id:
            continue
        try:
            image = session.load_image(fid)
        except (MissingFile, OSError):
            failures[fid] = REASON_UNREADABLE
            continue
        images[fid] = image
        feats = detect_and_describe(
            image, params.detector_kind, detector_params, params.max_features, fid
        )
        if len(feats) < 4 or len(base_features) < 2:
            failures[fid] = REASON_TOO_FEW_MATCHES
            continue
        matches = lowe_ratio_filter(match_descriptors(feats, base_features), params.lowe_ratio)
        if len(matches) < 4:
            failures[fid] = REASON_TOO_FEW_MATCHES
            continue
        pairs = [
            PointPair(
                (feats.keypoints[m.query_idx].x, feats.keypoints[m.query_idx].y),
                (base_features.keypoints[m.train_idx].x, base_features.keypoints[m.train_idx].y),
            )
            for m in matches
        ]
        try:
            fit = ransac_homography(
                pairs,
                reproj_thresh=params.ransac_thresh,
                confidence=params.ransac_confidence,
                max_iters=params.ransac_max_iters,
                seed=_frame_seed(params.seed, fid),
            )
            inlier_pairs = [p for p, ok in zip(pairs, fit.inlier_mask) if ok]
            homographies[fid] = refine_lm(fit.homography, inlier_pairs)
        except (NoModelFound, InsufficientPairs, DegenerateConfiguration,
                SingularNormalEquations, PointAtInfinity):
            failures[fid] = REASON_NO_MODEL

    estimated = [(fid, homographies[fid]) for fid in selected if fid in homographies]
    if params.flip_filter or params.stretch_filter:
        report = filter_frames(
            estimated,
            session.intrinsics,
            width,
            height,
            base_id,
            stretch_on=params.stretch_filter,
            flip_on=params.flip_filter,
            k_max=params.k_max,
            seed=params.seed,
            reference=params.stretch_reference,
        )
    else:
        report = FilterReport(tuple(fid for fid, _ in estimated), ())
    removed_reasons = dict(report.removed)

    included = [fid for fid in selected if fid in set(report.kept)]
    if not included:
        raise AllFramesExcluded("every frame was excluded by estimation or filtering")
    canvas_w, canvas_h, offset = plan_layout(
        [homographies[fid] for fid in included], width, height
    )
    shift = Homography.translation(*offset)

    acc_rgb = np.zeros((canvas_h, canvas_w, 3), dtype=np.float64)
    acc_a = np.zeros((canvas_h, canvas_w), dtype=np.float64)
    for fid in included:
        warped = warp_frame(images[fid], shift @ homographies[fid], canvas_w, canvas_h, params.alpha)
        if warped is not None:
            tile, (x0, y0) = warped
            _blend_tile(acc_rgb, acc_a, tile, x0, y0)
    image = _finalize_canvas(acc_rgb, acc_a)

    placements = []
    offset_vec = np.array(offset)
    for fid in selected:
        h = homographies.get(fid)
        if fid in set(included):
            quad = project_corners(h, width, height) + offset_vec
            placements.append(Placement(fid, h, quad, INCLUDED))
        else:
            reason = failures.get(fid) or removed_reasons.get(fid) or REASON_NO_MODEL
            quad = None
            if h is not None:
                try:
                    quad = project_corners(h, width, height) + offset_vec
                except PointAtInfinity:
                    quad = None
            placements.append(Placement(fid, h, quad, EXCLUDED, reason))

    return Panorama(
        canvas_width=canvas_w,
        canvas_height=canvas_h,
        offset=offset,
        placements=tuple(placements),
        image=image,
        base_frame_id=base_id,
        frame_width=width,
        frame_height=height,
        filter_report=report,
        params=params,
    )


def transform_detection(
    detection: Detection, placement: Placement, offset: tuple[float, float] = (0.0, 0.0)
) -> TransformedDetection:
    """Project a detection's bbox corners through its frame's homography.

    The centroid is the arithmetic mean of the four projected corners.
    """
    if not placement.included or placement.homography is None:
        raise DetectionOnExcludedFrame(
            f"frame {placement.frame_id} was excluded ({placement.reason})"
        )
    if detection.matched_frame_id != placement.frame_id:
        raise ValueError(
            f"detection matched to frame {detection.matched_frame_id}, "
            f"placement is for frame {placement.frame_id}"
        )
    x1, y1, x2, y2 = detection.bbox
    corners = np.array([[x1, y1], [x2, y1], [x2, y2], [x1, y2]], dtype=np.float64)
    hom = np.column_stack([corners, np.ones(4)])
    proj = hom @ placement.homography.m.T
    quad = proj[:, :2] / proj[:, 2:3] + np.array(offset)
    centroid = quad.mean(axis=0)
    return TransformedDetection(detection, quad, (float(centroid[0]), float(centroid[1])))


def transform_detections(
    panorama: Panorama, detections: Sequence[Detection]
) -> list[TransformedDetection]:
    """Transform all detections on Included frames; the rest are skipped."""
    by_id = {p.frame_id: p for p in panorama.placements}
    out = []
    for d in detections:
        placement = by_id.get(d.matched_frame_id)
        if placement is not None and placement.included:
            out.append(transform_detection(d, placement, panorama.offset))
    return out


def assign_palette(
    transformed: Sequence[TransformedDetection],
    palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE,
) -> dict[str, tuple[int, int, int]]:
    """Label colors by order of first appearance; cycles with a warning."""
    colors: dict[str, tuple[int, int, int]] = {}
    for t in transformed:
        label = t.detection.label
        if label in colors:
            continue
        if len(colors) >= len(palette):
            warnings.warn(
                f"palette exhausted after {len(palette)} labels; colors repeat",
                UnknownLabelColor,
                stacklevel=2,
            )
        colors[label] = tuple(palette[len(colors) % len(palette)])
    return colors


def _draw_arrowhead(draw: ImageDraw.ImageDraw, tail, tip, color, size=8.0) -> None:
    angle = math.atan2(tip[1] - tail[1], tip[0] - tail[0])
    for side in (math.radians(150), -math.radians(150)):
        end = (
            tip[0] + size * math.cos(angle + side),
            tip[1] + size * math.sin(angle + side),
        )
        draw.line([tuple(tip), end], fill=color, width=2)


def render_overlay(
    panorama: Panorama,
    transformed: Sequence[TransformedDetection],
    spec: OverlaySpec,
    palette: dict[str, tuple[int, int, int]] | None = None,
) -> np.ndarray:
    """Draw detection marks on a transparent canvas-sized RGBA raster.

    The panorama object is read, never mutated: regenerating an overlay is
    always independent of the mosaic build.
    """
    spec.validate()
    if palette is None:
        palette = assign_palette(transformed)
    canvas = Image.new("RGBA", (panorama.canvas_width, panorama.canvas_height), (0, 0, 0, 0))
    draw = ImageDraw.Draw(canvas)

    visible = [
        t
        for t in transformed
        if t.detection.confidence >= spec.min_confidence
        and (spec.label_filter is None or t.detection.label in spec.label_filter)
    ]

    if spec.style == STYLE_BOXES:
        for t in visible:
            color = palette.get(t.detection.label, DEFAULT_PALETTE[0])
            pts = [tuple(p) for p in t.quad]
            draw.polygon(pts, outline=color + (255,), width=2)
    elif spec.style == STYLE_CENTROIDS:
        for t in visible:
            color = palette.get(t.detection.label, DEFAULT_PALETTE[0])
            cx, cy = t.centroid
            draw.ellipse([cx - 4, cy - 4, cx + 4, cy + 4], fill=color + (255,))
    else:  # arrows
        by_label: dict[str, list[TransformedDetection]] = {}
        for t in visible:
            by_label.setdefault(t.detection.label, []).append(t)
        for label in sorted(by_label):
            color = palette.get(label, DEFAULT_PALETTE[0]) + (255,)
            for chain in analytics.arrow_chains(by_label[label]):
                nodes = [c for _, c in chain.nodes]
                for a, b in zip(nodes, nodes[1:]):
                    draw.line([tuple(a), tuple(b)], fill=color, width=2)
                    _draw_arrowhead(draw, a, b, color)

    if spec.highlighted_frame is not None:
        try:
            placement = panorama.placement(spec.highlighted_frame)
        except KeyError:
            placement = None
        if placement is not None and placement.quad is not None:
            pts = [tuple(p) for p in placement.quad]
            draw.polygon(pts, outline=HIGHLIGHT_COLOR + (255,), width=2)

    return np.asarray(canvas)
