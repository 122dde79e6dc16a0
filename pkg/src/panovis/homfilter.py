"""Defective-alignment filtering for panorama frames.

Two independent tests remove frames whose estimated homographies would
distort the mosaic:

* stretch filtering: each frame's homography is conjugated into normalized
  (calibrated) image coordinates, where a pixel translation t shrinks to
  t / f instead of being amplified by the focal length, and decomposed by
  SVD; its first two singular values then measure directional scaling and
  sit near (1, 1) for well-aligned frames. Frames are k-means clustered in
  (sigma1, sigma2) space, the cluster count picked by an elbow rule on the
  within-cluster sum of squares, and only the cluster whose centroid lies
  closest to a reference point survives.
* flip filtering: the projected corner quad is checked for vertical or
  horizontal order inversions; half-inverted quads are classified as
  twisted (the warp converges toward a point).

The base frame is always retained: the panorama plane is defined by it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BaseFrameMissing, PointAtInfinity
from .geometry import Homography, project_corners, svd3
from .ingest import Intrinsics

REASON_STRETCH = "StretchOutlier"

ORIGIN_REFERENCE = (0.0, 0.0)
# Singular values of the base frame's identity homography; arguably the
# intended comparison point, exposed as an alternative to the origin.
IDENTITY_REFERENCE = (1.0, 1.0)


class FlipClass(enum.Enum):
    NONE = "None"
    VERTICAL_FLIP = "VerticalFlip"
    HORIZONTAL_FLIP = "HorizontalFlip"
    BOTH_FLIPS = "BothFlips"
    TWISTED = "Twisted"


@dataclass(frozen=True)
class ScaleSignature:
    frame_id: int
    sigma1: float
    sigma2: float


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: tuple[tuple[float, float], ...]
    assignment: dict[int, int]
    wss_by_k: dict[int, float]


@dataclass(frozen=True)
class FilterReport:
    kept: tuple[int, ...]
    removed: tuple[tuple[int, str], ...]
    clustering: Clustering | None = None
    base_guard_applied: bool = False
    reference: tuple[float, float] = ORIGIN_REFERENCE


def calibrated_for_scale(H: Homography, K: Intrinsics) -> np.ndarray:
    """Conjugate a pixel-space homography into normalized image coordinates.

    This is the direction in which singular values isolate directional
    stretch: a camera-rotation-like homography maps to (nearly) a rotation
    with sigma = (1, 1, 1), and translations contribute t / f rather than
    f * t. The opposite operand order (see geometry.calibrate_homography)
    makes sigma1 track focal-scaled translation instead, which swamps any
    scale signal.
    """
    return K.inverse_matrix() @ H.m @ K.matrix()


def scale_signature(H: Homography, K: Intrinsics, frame_id: int = -1) -> ScaleSignature:
    """First two singular values of the homography in calibrated coordinates."""
    decomposed = svd3(calibrated_for_scale(H, K))
    return ScaleSignature(frame_id, decomposed.sigma[0], decomposed.sigma[1])


def kmeans_fixed_k(
    points: np.ndarray, k: int, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd k-means with greedy farthest-point initialization.

    Returns (centroids, assignment, wss). Fully deterministic and stable
    under appending duplicate points: the first center is the point
    farthest from the data centroid and every tie resolves to the lowest
    index. ``seed`` is accepted for API stability but the deterministic
    seeding never consults it (randomizing the first center would let a
    duplicated signature reshuffle the whole clustering).
    """
    del seed
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    spread = ((points - points.mean(axis=0)) ** 2).sum(axis=1)
    chosen = [int(np.argmax(spread))]
    while len(chosen) < k:
        d2 = np.min(
            ((points[:, None, :] - points[chosen][None, :, :]) ** 2).sum(axis=2), axis=1
        )
        chosen.append(int(np.argmax(d2)))
    centroids = points[chosen].astype(np.float64).copy()

    assignment: np.ndarray | None = None
    for _ in range(100):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = np.argmin(d2, axis=1)
        conscripted: set[int] = set()
        for j in range(k):
            if not np.any(new_assignment == j):
                # re-anchor an empty cluster at the worst-fit point; each
                # empty cluster must claim a distinct point
                residual = d2[np.arange(n), new_assignment].copy()
                if conscripted:
                    residual[list(conscripted)] = -1.0
                far = int(np.argmax(residual))
                new_assignment[far] = j
                conscripted.add(far)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = points[assignment == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    assert assignment is not None

    # Duplicate-heavy inputs can leave clusters empty; compress to the
    # non-empty ones so k always equals the number of real clusters.
    occupied = [j for j in range(k) if np.any(assignment == j)]
    remap = {j: i for i, j in enumerate(occupied)}
    assignment = np.array([remap[j] for j in assignment])
    centroids = np.array([points[assignment == i].mean(axis=0) for i in range(len(occupied))])
    wss = float(((points - centroids[assignment]) ** 2).sum())
    return centroids, assignment, wss


def kmeans_elbow(
    points: Sequence[tuple[float, float]] | np.ndarray,
    k_max: int = 8,
    seed: int = 0,
    ids: Sequence[int] | None = None,
    elbow_drop_threshold: float = 0.10,
    elbow_wss_floor: float = 1.0,
) -> Clustering:
    """Cluster scale signatures, choosing k where WSS stops dropping sharply.

    Runs k-means for k = 1..min(k_max, n) and selects the smallest k whose
    marginal WSS improvement falls below ``elbow_drop_threshold`` of
    max(WSS(1), ``elbow_wss_floor``). The floor keeps a single tight blob of
    signatures from being split forever: in stretch-factor units, scatter
    well below one squared unit never counts as a sharp drop.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(points)
    if n < 1:
        raise ValueError("kmeans_elbow needs at least one point")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if ids is None:
        ids = list(range(n))

    k_cap = min(k_max, n)
    runs = {k: kmeans_fixed_k(points, k, seed) for k in range(1, k_cap + 1)}
    wss_by_k = {k: run[2] for k, run in runs.items()}

    baseline = max(wss_by_k[1], elbow_wss_floor, 1e-12)
    selected = k_cap
    for k in range(1, k_cap):
        drop = (wss_by_k[k] - wss_by_k[k + 1]) / baseline
        if drop < elbow_drop_threshold:
            selected = k
            break

    centroids, assignment, _ = runs[selected]
    return Clustering(
        k=len(centroids),
        centroids=tuple((float(c[0]), float(c[1])) for c in centroids),
        assignment={int(fid): int(c) for fid, c in zip(ids, assignment)},
        wss_by_k={k: float(v) for k, v in wss_by_k.items()},
    )


def filter_stretched(
    signatures: Sequence[ScaleSignature],
    base_frame_id: int,
    k_max: int = 8,
    seed: int = 0,
    reference: tuple[float, float] = ORIGIN_REFERENCE,
    elbow_drop_threshold: float = 0.10,
) -> FilterReport:
    """Keep only the cluster whose centroid is closest to ``reference``.

    If the base frame would land outside that cluster, the base frame's
    cluster is retained instead and the report flags the override.
    """
    ids = [int(s.frame_id) for s in signatures]
    if base_frame_id not in ids:
        raise BaseFrameMissing(f"base frame {base_frame_id} not among signatures")
    clustering = kmeans_elbow(
        [(s.sigma1, s.sigma2) for s in signatures],
        k_max=k_max,
        seed=seed,
        ids=ids,
        elbow_drop_threshold=elbow_drop_threshold,
    )
    dists = [math.hypot(c[0] - reference[0], c[1] - reference[1]) for c in clustering.centroids]
    retained = int(np.argmin(dists))
    guard = False
    if clustering.assignment[base_frame_id] != retained:
        retained = clustering.assignment[base_frame_id]
        guard = True
    kept = tuple(fid for fid in ids if clustering.assignment[fid] == retained)
    removed = tuple(
        (fid, REASON_STRETCH) for fid in ids if clustering.assignment[fid] != retained
    )
    return FilterReport(kept, removed, clustering, guard, reference)


def detect_flip(H: Homography, width: float, height: float) -> FlipClass:
    """Classify corner-order inversions of the projected frame quad.

    With corners (x1,y1)..(x4,y4) clockwise from top-left, the tests are
    (1) y3 < y2, (2) y4 < y1, (3) x2 < x1, (4) x3 < x4. Both of (1),(2)
    mean a vertical flip; both of (3),(4) a horizontal flip; all four a
    double flip. A half-satisfied pair means the quad crosses itself
    (twisted).
    """
    quad = project_corners(H, width, height)
    (_, y1), (x2, y2), (x3, y3), (x4, y4) = quad[0], quad[1], quad[2], quad[3]
    x1 = quad[0][0]
    c1 = y3 < y2
    c2 = y4 < y1
    c3 = x2 < x1
    c4 = x3 < x4
    if c1 and c2 and c3 and c4:
        return FlipClass.BOTH_FLIPS
    if (c1 != c2) or (c3 != c4):
        return FlipClass.TWISTED
    if c1 and c2:
        return FlipClass.VERTICAL_FLIP
    if c3 and c4:
        return FlipClass.HORIZONTAL_FLIP
    return FlipClass.NONE


def filter_frames(
    frames: Sequence[tuple[int, Homography]],
    K: Intrinsics,
    width: float,
    height: float,
    base_frame_id: int,
    stretch_on: bool = True,
    flip_on: bool = True,
    k_max: int = 8,
    seed: int = 0,
    reference: tuple[float, float] = ORIGIN_REFERENCE,
    elbow_drop_threshold: float = 0.10,
) -> FilterReport:
    """Run flip filtering, then stretch clustering over the survivors.

    Every input frame appears exactly once in the report, either kept or
    removed with a reason; the base frame is always kept.
    """
    ids = [int(fid) for fid, _ in frames]
    if base_frame_id not in ids:
        raise BaseFrameMissing(f"base frame {base_frame_id} not among input frames")

    removed: list[tuple[int, str]] = []
    survivors: list[tuple[int, Homography]] = []
    if flip_on:
        for fid, h in frames:
            fid = int(fid)
            if fid == base_frame_id:
                survivors.append((fid, h))
                continue
            try:
                cls = detect_flip(h, width, height)
            except PointAtInfinity:
                cls = FlipClass.TWISTED
            if cls is FlipClass.NONE:
                survivors.append((fid, h))
            else:
                removed.append((fid, cls.value))
    else:
        survivors = [(int(fid), h) for fid, h in frames]

    clustering = None
    guard = False
    if stretch_on:
        signatures = [scale_signature(h, K, fid) for fid, h in survivors]
        stretch_report = filter_stretched(
            signatures,
            base_frame_id,
            k_max=k_max,
            seed=seed,
            reference=reference,
            elbow_drop_threshold=elbow_drop_threshold,
        )
        kept = stretch_report.kept
        removed.extend(stretch_report.removed)
        clustering = stretch_report.clustering
        guard = stretch_report.base_guard_applied
    else:
        kept = tuple(fid for fid, _ in survivors)

    return FilterReport(tuple(kept), tuple(removed), clustering, guard, reference)
