"""Keypoint detection, binary descriptors, and descriptor matching.

The built-in detector is a multi-scale FAST-style segment-test corner
detector ranked by Harris response, with intensity-centroid orientation and
a 256-bit rotated binary-intensity-comparison descriptor sampled from a
fixed pseudo-random pattern. It registers under the name ``orb`` (the
closest of the selectable detector kinds); the other kinds are recognized
but unavailable unless a plug-in registers them.

Everything here is pure and deterministic: identical images and parameters
produce bit-identical feature sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DescriptorLengthMismatch,
    ImageTooSmall,
    TrainSetTooSmall,
    UnsupportedDetector,
)

DESCRIPTOR_BITS = 256
PATCH_SIZE = 31
_MARGIN = 16  # half a descriptor patch, rounded up; also covers the orientation disc
_ORIENTATION_RADIUS = 15
_PATTERN_RADIUS = 13.0
_BLUR_HALF = 2  # 5x5 box blur before descriptor sampling

KNOWN_DETECTOR_KINDS = ("brisk", "orb", "kaze", "akaze")


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    scale: float = 1.0
    orientation: float = 0.0


@dataclass(frozen=True)
class Match:
    query_idx: int
    train_idx: int
    distance: float


@dataclass(frozen=True)
class DetectorParams:
    fast_threshold: float = 20.0
    fast_arc: int = 9
    n_levels: int = 3
    harris_k: float = 0.04


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Keypoints plus their packed descriptors (one uint8 row of 32 bytes each)."""

    frame_id: int
    keypoints: tuple[Keypoint, ...]
    descriptors: np.ndarray
    detector_kind: str
    descriptor_bits: int = DESCRIPTOR_BITS

    def __post_init__(self) -> None:
        if len(self.keypoints) != len(self.descriptors):
            raise ValueError("keypoints and descriptors must stay parallel")

    def __len__(self) -> int:
        return len(self.keypoints)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """8-bit luma (0.299 R + 0.587 G + 0.114 B, rounded)."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.uint8)
    rgb = image[..., :3].astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.rint(luma).astype(np.uint8)


# Bresenham circle of radius 3, ordered around the ring (x right, y down).
_FAST_RING = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


def _fast_candidates(gray: np.ndarray, threshold: float, arc: int) -> np.ndarray:
    """Boolean mask of segment-test corners (borders always False)."""
    img = gray.astype(np.float64)
    h, w = img.shape
    center = img[3 : h - 3, 3 : w - 3]
    brighter = np.empty((16,) + center.shape, dtype=bool)
    darker = np.empty_like(brighter)
    for k, (dx, dy) in enumerate(_FAST_RING):
        ring = img[3 + dy : h - 3 + dy, 3 + dx : w - 3 + dx]
        brighter[k] = ring > center + threshold
        darker[k] = ring < center - threshold
    hit = _has_circular_run(brighter, arc) | _has_circular_run(darker, arc)
    mask = np.zeros((h, w), dtype=bool)
    mask[3 : h - 3, 3 : w - 3] = hit
    return mask


def _has_circular_run(flags: np.ndarray, run: int) -> np.ndarray:
    ext = np.concatenate([flags, flags[: run - 1]], axis=0)
    out = np.zeros(flags.shape[1:], dtype=bool)
    for start in range(16):
        window = ext[start : start + run]
        out |= window.all(axis=0)
    return out


def _separable_filter(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size separable convolution with edge replication."""
    r = len(kernel) // 2
    padded = np.pad(img, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for i, kv in enumerate(kernel):
        out += kv * padded[:, i : i + img.shape[1]]
    padded = np.pad(out, ((r, r), (0, 0)), mode="edge")
    out2 = np.zeros_like(out)
    for i, kv in enumerate(kernel):
        out2 += kv * padded[i : i + img.shape[0], :]
    return out2


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    r = 1
    px = np.pad(img, ((0, 0), (r, r)), mode="edge")
    dx = sum(kv * px[:, i : i + img.shape[1]] for i, kv in enumerate(diff))
    px = np.pad(dx, ((r, r), (0, 0)), mode="edge")
    gx = sum(kv * px[i : i + img.shape[0], :] for i, kv in enumerate(smooth))
    py = np.pad(img, ((r, r), (0, 0)), mode="edge")
    dy = sum(kv * py[i : i + img.shape[0], :] for i, kv in enumerate(diff))
    py = np.pad(dy, ((0, 0), (r, r)), mode="edge")
    gy = sum(kv * py[:, i : i + img.shape[1]] for i, kv in enumerate(smooth))
    return gx, gy


_HARRIS_WINDOW = np.array([1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0]) / 64.0


def _harris_response(gray: np.ndarray, k: float) -> np.ndarray:
    img = gray.astype(np.float64)
    gx, gy = _sobel(img)
    sxx = _separable_filter(gx * gx, _HARRIS_WINDOW)
    syy = _separable_filter(gy * gy, _HARRIS_WINDOW)
    sxy = _separable_filter(gx * gy, _HARRIS_WINDOW)
    return (sxx * syy - sxy * sxy) - k * (sxx + syy) ** 2


def _subpixel_offsets(response: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic peak interpolation of the response, one axis at a time."""
    def axis_offset(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray) -> np.ndarray:
        denom = prev - 2.0 * mid + nxt
        with np.errstate(divide="ignore", invalid="ignore"):
            off = 0.5 * (prev - nxt) / denom
        off = np.where(np.abs(denom) > 1e-12, off, 0.0)
        return np.clip(off, -0.5, 0.5)

    dx = axis_offset(response[ys, xs - 1], response[ys, xs], response[ys, xs + 1])
    dy = axis_offset(response[ys - 1, xs], response[ys, xs], response[ys + 1, xs])
    return dx, dy


def _nms(score: np.ndarray) -> np.ndarray:
    """3x3 non-maximum suppression with a raster-order tie break, so exactly
    one keypoint survives per plateau and the rule is translation covariant."""
    p = np.pad(score, 1, mode="constant", constant_values=-np.inf)
    c = p[1:-1, 1:-1]
    strictly_before = (
        (c > p[:-2, :-2]) & (c > p[:-2, 1:-1]) & (c > p[:-2, 2:]) & (c > p[1:-1, :-2])
    )
    at_least_after = (
        (c >= p[1:-1, 2:]) & (c >= p[2:, :-2]) & (c >= p[2:, 1:-1]) & (c >= p[2:, 2:])
    )
    return strictly_before & at_least_after


def _box_blur(gray: np.ndarray, half: int = _BLUR_HALF) -> np.ndarray:
    size = 2 * half + 1
    kernel = np.full(size, 1.0 / size)
    return _separable_filter(gray.astype(np.float64), kernel)


_DISC_OFFSETS = np.array(
    [
        (dx, dy)
        for dy in range(-_ORIENTATION_RADIUS, _ORIENTATION_RADIUS + 1)
        for dx in range(-_ORIENTATION_RADIUS, _ORIENTATION_RADIUS + 1)
        if dx * dx + dy * dy <= _ORIENTATION_RADIUS * _ORIENTATION_RADIUS
    ]
)


def _orientations(gray: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Intensity-centroid angle per keypoint, in [0, 2 pi)."""
    img = gray.astype(np.float64)
    sample_y = ys[None, :] + _DISC_OFFSETS[:, 1][:, None]
    sample_x = xs[None, :] + _DISC_OFFSETS[:, 0][:, None]
    vals = img[sample_y, sample_x]
    m10 = (_DISC_OFFSETS[:, 0][:, None] * vals).sum(axis=0)
    m01 = (_DISC_OFFSETS[:, 1][:, None] * vals).sum(axis=0)
    return np.mod(np.arctan2(m01, m10), 2.0 * math.pi)


def _make_pattern() -> np.ndarray:
    """256 fixed comparison point pairs inside a disc of radius 13."""
    rng = np.random.default_rng(0x9E3779B9)
    pts: list[np.ndarray] = []
    while len(pts) < 2 * DESCRIPTOR_BITS:
        cand = rng.normal(0.0, PATCH_SIZE / 5.0, size=(256, 2))
        keep = cand[np.hypot(cand[:, 0], cand[:, 1]) <= _PATTERN_RADIUS]
        pts.extend(keep)
    return np.array(pts[: 2 * DESCRIPTOR_BITS]).reshape(DESCRIPTOR_BITS, 2, 2)


_PATTERN = _make_pattern()


def _describe(blurred: np.ndarray, ys: np.ndarray, xs: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Steered binary descriptors, packed to (n, 32) uint8."""
    n = len(ys)
    if n == 0:
        return np.zeros((0, DESCRIPTOR_BITS // 8), dtype=np.uint8)
    cos_t = np.cos(angles)
    sin_t = np.sin(angles)
    ax, ay = _PATTERN[:, 0, 0], _PATTERN[:, 0, 1]
    bx, by = _PATTERN[:, 1, 0], _PATTERN[:, 1, 1]
    # Rotate the pattern per keypoint, then round to pixel offsets.
    rax = np.rint(cos_t[:, None] * ax[None, :] - sin_t[:, None] * ay[None, :]).astype(int)
    ray = np.rint(sin_t[:, None] * ax[None, :] + cos_t[:, None] * ay[None, :]).astype(int)
    rbx = np.rint(cos_t[:, None] * bx[None, :] - sin_t[:, None] * by[None, :]).astype(int)
    rby = np.rint(sin_t[:, None] * bx[None, :] + cos_t[:, None] * by[None, :]).astype(int)
    va = blurred[ys[:, None] + ray, xs[:, None] + rax]
    vb = blurred[ys[:, None] + rby, xs[:, None] + rbx]
    bits = va < vb
    return np.packbits(bits, axis=1)


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - (h % 2), : w - (w % 2)]
    return (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2]) / 4.0


def _detect_builtin(image: np.ndarray, params: DetectorParams, max_features: int, frame_id: int) -> FeatureSet:
    gray = to_grayscale(image).astype(np.float64)
    if min(gray.shape) < 2 * _MARGIN + 1:
        raise ImageTooSmall(
            f"image {gray.shape[1]}x{gray.shape[0]} cannot support a {PATCH_SIZE}px descriptor patch"
        )

    found: list[tuple[float, float, float, float, float, np.ndarray]] = []
    level_img = gray
    for level in range(params.n_levels):
        scale = float(2**level)
        if min(level_img.shape) < 2 * _MARGIN + 1:
            break
        candidates = _fast_candidates(level_img, params.fast_threshold, params.fast_arc)
        h, w = level_img.shape
        candidates[:_MARGIN, :] = False
        candidates[h - _MARGIN :, :] = False
        candidates[:, :_MARGIN] = False
        candidates[:, w - _MARGIN :] = False
        if candidates.any():
            response = _harris_response(level_img, params.harris_k)
            score = np.where(candidates, response, -np.inf)
            keep = _nms(score) & candidates
            ys, xs = np.nonzero(keep)
            if len(ys):
                angles = _orientations(level_img, ys, xs)
                descs = _describe(_box_blur(level_img), ys, xs, angles)
                dx, dy = _subpixel_offsets(response, ys, xs)
                offset = (scale - 1.0) / 2.0
                for i in range(len(ys)):
                    found.append((
                        float(response[ys[i], xs[i]]),
                        scale,
                        float((xs[i] + dx[i]) * scale + offset),
                        float((ys[i] + dy[i]) * scale + offset),
                        float(angles[i]),
                        descs[i],
                    ))
        level_img = _downsample2(level_img)

    # Rank by descending response; ties are broken deterministically.
    found.sort(key=lambda kp: (-kp[0], kp[1], kp[3], kp[2]))
    found = found[:max_features]
    keypoints = tuple(
        Keypoint(x=x, y=y, response=r, scale=s, orientation=a) for r, s, x, y, a, _ in found
    )
    descriptors = (
        np.stack([d for *_, d in found])
        if found
        else np.zeros((0, DESCRIPTOR_BITS // 8), dtype=np.uint8)
    )
    return FeatureSet(frame_id, keypoints, descriptors, "orb")


DetectorFn = Callable[[np.ndarray, DetectorParams, int, int], FeatureSet]

_DETECTORS: dict[str, DetectorFn] = {"orb": _detect_builtin}


def register_detector(kind: str, fn: DetectorFn) -> None:
    """Install a detector plug-in under one of the selectable kind names."""
    _DETECTORS[kind.lower()] = fn


def detect_and_describe(
    image: np.ndarray,
    detector_kind: str = "orb",
    params: DetectorParams | None = None,
    max_features: int = 1500,
    frame_id: int = -1,
) -> FeatureSet:
    """Detect at most ``max_features`` keypoints, strongest response first."""
    if max_features < 4:
        raise ValueError("max_features must be >= 4")
    kind = detector_kind.lower()
    fn = _DETECTORS.get(kind)
    if fn is None:
        known = ", ".join(sorted(set(KNOWN_DETECTOR_KINDS) | set(_DETECTORS)))
        raise UnsupportedDetector(f"detector '{detector_kind}' is not registered (known kinds: {known})")
    return fn(image, params or DetectorParams(), max_features, frame_id)


_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint16)


def hamming_distances(query: np.ndarray, train: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances between packed descriptor rows."""
    return _POPCOUNT[query[:, None, :] ^ train[None, :, :]].sum(axis=2)


def match_descriptors(query: FeatureSet, train: FeatureSet) -> list[tuple[Match, Match]]:
    """Exhaustive 2-nearest-neighbor matching by Hamming distance.

    Returns, per query descriptor, its best and second-best train matches.
    Equal distances resolve to the lower train index.
    """
    if query.descriptor_bits != train.descriptor_bits:
        raise DescriptorLengthMismatch(
            f"{query.descriptor_bits} vs {train.descriptor_bits} bit descriptors"
        )
    if len(train) < 2:
        raise TrainSetTooSmall("2-NN matching needs at least 2 train descriptors")
    results: list[tuple[Match, Match]] = []
    chunk = 512
    for start in range(0, len(query), chunk):
        q = query.descriptors[start : start + chunk]
        dist = hamming_distances(q, train.descriptors)
        order = np.argsort(dist, axis=1, kind="stable")[:, :2]
        for row in range(len(q)):
            qi = start + row
            b, s = int(order[row, 0]), int(order[row, 1])
            results.append((
                Match(qi, b, float(dist[row, b])),
                Match(qi, s, float(dist[row, s])),
            ))
    return results


def lowe_ratio_filter(pairs: Sequence[tuple[Match, Match]], ratio: float = 0.75) -> list[Match]:
    """Keep a best match only when clearly better than the runner-up."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    return [best for best, second in pairs if best.distance < ratio * second.distance]
