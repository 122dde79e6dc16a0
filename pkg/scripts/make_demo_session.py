#!/usr/bin/env python3
"""Generate a synthetic demo session on disk.

The session mimics an egocentric recording: a camera panning over a
textured scene, three drifting objects with ground-truth boxes, and noisy
model predictions (jitter, dropouts, duplicates, one spurious label).

Usage:
    python scripts/make_demo_session.py --out demo/session --frames 30 --seed 7
    panovis stitch --session demo/session --range 0:29 --out demo/run
"""

from __future__ import annotations

import argparse
from pathlib import Path

from panovis.synth import demo_session


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="target session directory")
    parser.add_argument("--frames", type=int, default=30)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    session = demo_session(Path(args.out), n_frames=args.frames, seed=args.seed)
    print(f"wrote {len(session.frames)} frames, {len(session.predictions)} predictions, "
          f"{len(session.ground_truth)} ground-truth boxes to {args.out}")
    print(f"labels: {sorted(session.vocabulary)}")


if __name__ == "__main__":
    main()
