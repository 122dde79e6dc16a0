#!/usr/bin/env python3
"""Show the alignment filter working on deliberately corrupted homographies.

Builds a set of plausible frame-to-base transforms, corrupts a few by
over-scaling or mirroring, and prints the singular-value signatures, the
WSS table behind the cluster-count choice, and the final verdicts.

Usage:
    python scripts/filter_demo.py --frames 12 --corrupt 3 --seed 0
"""

from __future__ import annotations

import argparse

import numpy as np

from panovis.geometry import Homography
from panovis.homfilter import filter_frames, scale_signature
from panovis.ingest import Intrinsics


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=12)
    parser.add_argument("--corrupt", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    width, height = 760, 428
    k = Intrinsics(760.0, 760.0, width / 2, height / 2)
    base = args.frames // 2

    frames: list[tuple[int, Homography]] = []
    for fid in range(args.frames):
        h = Homography.rotation(rng.uniform(-0.1, 0.1), (width / 2, height / 2))
        h = h @ Homography.translation(rng.uniform(-50, 50), rng.uniform(-40, 40))
        frames.append((fid, h))

    candidates = [fid for fid in range(args.frames) if fid != base]
    bad = sorted(rng.choice(candidates, size=min(args.corrupt, len(candidates)), replace=False))
    for i, fid in enumerate(bad):
        h = frames[fid][1]
        if i % 3 == 2:
            corrupted = Homography.from_matrix(
                np.array([[1.0, 0, 0], [0, -1.0, height], [0, 0, 1.0]]) @ h.m
            )
        else:
            factor = rng.uniform(8, 25)
            corrupted = Homography.from_matrix(np.diag([factor, factor, 1.0]) @ h.m)
        frames[fid] = (fid, corrupted)

    print(f"{'frame':>5} {'sigma1':>10} {'sigma2':>10}   injected")
    for fid, h in frames:
        sig = scale_signature(h, k, fid)
        mark = "corrupted" if fid in bad else ("base" if fid == base else "")
        print(f"{fid:>5} {sig.sigma1:>10.3f} {sig.sigma2:>10.3f}   {mark}")

    report = filter_frames(frames, k, width, height, base_frame_id=base, seed=args.seed)
    print("\nWSS by k:", {k_: round(v, 4) for k_, v in (report.clustering.wss_by_k if report.clustering else {}).items()})
    if report.clustering:
        print("chosen k:", report.clustering.k, " centroids:",
              [(round(a, 3), round(b, 3)) for a, b in report.clustering.centroids])
    print("kept:   ", list(report.kept))
    print("removed:", list(report.removed))
    print("injected:", bad)


if __name__ == "__main__":
    main()
