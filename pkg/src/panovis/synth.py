"""Seeded synthetic scenes and sessions.

A random color-mosaic scene gives dense, distinctive corners; rigid crops
of it simulate an erratically panning head-mounted camera with known
ground-truth placements. The generators double as test oracles (every
transform is known analytically) and as demo data for the CLI and service.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .compositor import warp_frame
from .geometry import Homography
from .ingest import Session, load_session


def mosaic_scene(width: int = 512, height: int = 512, cell: int = 16, seed: int = 0) -> np.ndarray:
    """Random mosaic of solid color cells: corner-rich and locally distinct."""
    rng = np.random.default_rng(seed)
    cells = rng.integers(20, 236, size=(math.ceil(height / cell), math.ceil(width / cell), 3))
    img = np.kron(cells, np.ones((cell, cell, 1), dtype=np.int64))
    return img[:height, :width].astype(np.uint8)


def crop_affine(center: tuple[float, float], angle_rad: float, width: int, height: int) -> np.ndarray:
    """Rigid map from crop pixel coordinates to scene coordinates."""
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    return np.array([
        [c, -s, center[0] - c * cx + s * cy],
        [s, c, center[1] - s * cx - c * cy],
        [0.0, 0.0, 1.0],
    ])


def sample_crop(scene: np.ndarray, affine: np.ndarray, width: int, height: int) -> np.ndarray:
    """Cut a rigid crop out of the scene with bilinear sampling."""
    to_crop = Homography.from_matrix(np.linalg.inv(affine))
    warped = warp_frame(scene, to_crop, width, height, alpha=1.0)
    assert warped is not None, "crop must intersect the scene"
    tile, (x0, y0) = warped
    out = np.zeros((height, width, 3), dtype=np.uint8)
    out[y0 : y0 + tile.shape[0], x0 : x0 + tile.shape[1]] = tile[..., :3]
    return out


def crop_truth_homography(affine_frame: np.ndarray, affine_base: np.ndarray) -> Homography:
    """Ground-truth frame-to-base homography for two crops of one scene."""
    return Homography.from_matrix(np.linalg.inv(affine_base) @ affine_frame)


def plan_crop_set(
    n_frames: int,
    seed: int,
    scene_size: int = 512,
    crop_size: tuple[int, int] = (200, 150),
    max_angle_deg: float = 10.0,
    max_shift: tuple[float, float] = (55.0, 40.0),
) -> list[np.ndarray]:
    """Crop-to-scene affines for overlapping views around the scene center.

    Shifts are bounded so every crop keeps well over 40% overlap with the
    base crop; the base (median index) gets zero rotation.
    """
    rng = np.random.default_rng(seed)
    w, h = crop_size
    center = ((scene_size - 1) / 2.0, (scene_size - 1) / 2.0)
    base_index = n_frames // 2
    affines = []
    for i in range(n_frames):
        if i == base_index:
            affines.append(crop_affine(center, 0.0, w, h))
            continue
        dx = rng.uniform(-max_shift[0], max_shift[0])
        dy = rng.uniform(-max_shift[1], max_shift[1])
        angle = math.radians(rng.uniform(-max_angle_deg, max_angle_deg))
        affines.append(crop_affine((center[0] + dx, center[1] + dy), angle, w, h))
    return affines


def write_session_dir(
    root: Path,
    images: list[np.ndarray],
    timestamps: list[float],
    predictions: list[dict],
    ground_truth: list[dict] | None = None,
    fps_note: float = 15.0,
) -> Path:
    """Materialize frames and detection streams in the on-disk layout."""
    root = Path(root)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (img, t) in enumerate(zip(images, timestamps)):
        rel = f"frames/{i:06d}.png"
        Image.fromarray(img, mode="RGB").save(root / rel)
        entries.append({"id": i, "t": t, "file": rel})
    (root / "frames.json").write_text(json.dumps(entries, indent=1), encoding="utf-8")
    with open(root / "detections.jsonl", "w", encoding="utf-8") as fh:
        for rec in predictions:
            fh.write(json.dumps(rec) + "\n")
    if ground_truth is not None:
        with open(root / "groundtruth.jsonl", "w", encoding="utf-8") as fh:
            for rec in ground_truth:
                fh.write(json.dumps(rec) + "\n")
    return root


def synthetic_crop_session(
    root: Path,
    n_frames: int = 7,
    seed: int = 0,
    scene_size: int = 512,
    crop_size: tuple[int, int] = (200, 150),
    max_angle_deg: float = 10.0,
    object_path: bool = False,
) -> tuple[Session, dict[int, Homography]]:
    """Write a session of overlapping crops; returns it plus ground truth.

    With ``object_path`` a synthetic object moves along a known diagonal
    track in scene coordinates and is emitted as a prediction wherever its
    box fits fully inside a frame.
    """
    scene = mosaic_scene(scene_size, scene_size, seed=seed)
    affines = plan_crop_set(n_frames, seed + 1, scene_size, crop_size, max_angle_deg)
    base_index = n_frames // 2
    w, h = crop_size
    images = [sample_crop(scene, a, w, h) for a in affines]
    timestamps = [i / 15.0 for i in range(n_frames)]

    predictions: list[dict] = []
    if object_path:
        half = 11.0
        for i, affine in enumerate(affines):
            cx = (scene_size - 1) / 2.0 - 40.0 + 13.0 * i
            cy = (scene_size - 1) / 2.0 - 25.0 + 9.0 * i
            inv = np.linalg.inv(affine)
            u, v, _ = inv @ (cx, cy, 1.0)
            if half <= u <= w - 1 - half and half <= v <= h - 1 - half:
                predictions.append({
                    "t": timestamps[i],
                    "label": "tracer",
                    "bbox": [u - half, v - half, u + half, v + half],
                    "confidence": 0.9,
                })

    write_session_dir(root, images, timestamps, predictions, ground_truth=[])
    session = load_session(root)
    truth = {
        i: crop_truth_homography(affines[i], affines[base_index]) for i in range(n_frames)
    }
    return session, truth


_DEMO_LABELS = ("mug", "whisk", "cutting board")


def demo_session(root: Path, n_frames: int = 30, seed: int = 7) -> Session:
    """A 30-frame fixture session: panning crops, moving objects, noisy
    predictions with duplicates, dropouts, and one spurious label."""
    rng = np.random.default_rng(seed)
    scene_size = 640
    w, h = 220, 160
    scene = mosaic_scene(scene_size, scene_size, cell=14, seed=seed)

    # Smooth sweeping camera path with light jitter and rotation.
    affines = []
    for i in range(n_frames):
        phase = i / max(n_frames - 1, 1)
        cx = scene_size / 2.0 - 90.0 + 180.0 * phase + rng.uniform(-6, 6)
        cy = scene_size / 2.0 + 55.0 * math.sin(2.0 * math.pi * phase) + rng.uniform(-5, 5)
        angle = math.radians(6.0 * math.sin(3.0 * math.pi * phase) + rng.uniform(-1.5, 1.5))
        affines.append(crop_affine((cx, cy), angle, w, h))

    # Objects drift in scene coordinates.
    object_tracks = {
        "mug": lambda p: (scene_size / 2.0 - 60.0 + 120.0 * p, scene_size / 2.0 - 30.0),
        "whisk": lambda p: (scene_size / 2.0 + 40.0, scene_size / 2.0 - 40.0 + 90.0 * p),
        "cutting board": lambda p: (scene_size / 2.0 - 20.0 + 60.0 * p, scene_size / 2.0 + 45.0),
    }
    sizes = {"mug": 13.0, "whisk": 9.0, "cutting board": 18.0}
    colors = {"mug": (250, 60, 60), "whisk": (60, 250, 60), "cutting board": (70, 70, 250)}

    images = []
    timestamps = [i / 15.0 for i in range(n_frames)]
    predictions: list[dict] = []
    ground_truth: list[dict] = []
    for i, affine in enumerate(affines):
        img = sample_crop(scene, affine, w, h)
        phase = i / max(n_frames - 1, 1)
        inv = np.linalg.inv(affine)
        for label, track in object_tracks.items():
            sx, sy = track(phase)
            u, v, _ = inv @ (sx, sy, 1.0)
            half = sizes[label]
            if not (half <= u <= w - 1 - half and half <= v <= h - 1 - half):
                continue
            x1, y1, x2, y2 = u - half, v - half, u + half, v + half
            img[int(y1) : int(y2) + 1, int(x1) : int(x2) + 1] = colors[label]
            ground_truth.append({
                "t": timestamps[i],
                "label": label,
                "bbox": [x1, y1, x2, y2],
                "confidence": 1.0,
            })
            # Model behavior: jittered boxes, occasional miss, rare duplicate.
            if rng.random() < 0.85:
                jitter = rng.uniform(-3, 3, size=4)
                predictions.append({
                    "t": timestamps[i] + float(rng.uniform(-0.01, 0.01)),
                    "label": label,
                    "bbox": [x1 + jitter[0], y1 + jitter[1], x2 + jitter[2], y2 + jitter[3]],
                    "confidence": float(rng.uniform(0.55, 0.98)),
                })
                if rng.random() < 0.12:
                    predictions.append({
                        "t": timestamps[i],
                        "label": label,
                        "bbox": [x1 + 8, y1 + 6, x2 + 8, y2 + 6],
                        "confidence": float(rng.uniform(0.4, 0.7)),
                    })
        if rng.random() < 0.15:
            fx = float(rng.uniform(20, w - 40))
            fy = float(rng.uniform(20, h - 40))
            predictions.append({
                "t": timestamps[i],
                "label": "toothpicks",
                "bbox": [fx, fy, fx + 16, fy + 12],
                "confidence": float(rng.uniform(0.3, 0.6)),
            })
        images.append(img)

    write_session_dir(root, images, timestamps, predictions, ground_truth)
    return load_session(root)
