"""Batch command-line interface: stitch, analytics, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
single structured JSON diagnostic line to stderr. All outputs are
deterministic under a fixed --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .compositor import (
    OVERLAY_STYLES,
    OverlaySpec,
    PanoramaParams,
    build_panorama,
    render_overlay,
    transform_detections,
)
from .errors import InvalidRange, PanovisError
from .homfilter import IDENTITY_REFERENCE, ORIGIN_REFERENCE
from .ingest import load_session
from .reports import (
    analytics_document,
    dump_json,
    encode_png,
    panorama_report,
    report_distance_series,
    series_json,
)


def _parse_range(text: str) -> tuple[int, int]:
    try:
        start_s, end_s = text.split(":", 1)
        start, end = int(start_s), int(end_s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like a:b, got '{text}'") from None
    if start > end:
        raise argparse.ArgumentTypeError(f"range start {start} exceeds end {end}")
    return start, end


def _fail(exc: Exception, code: str | None = None) -> int:
    payload = {"error": code or getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panovis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    stitch = sub.add_parser("stitch", help="build a panorama and overlay from a session")
    stitch.add_argument("--session", required=True, help="session directory")
    stitch.add_argument("--range", required=True, type=_parse_range, dest="frame_range",
                        metavar="A:B", help="inclusive frame-id range")
    stitch.add_argument("--stride", type=int, default=1, help="take every n-th frame")
    stitch.add_argument("--base", type=int, default=None, help="base frame id (default: median)")
    stitch.add_argument("--detector", default="orb")
    stitch.add_argument("--lowe-ratio", type=float, default=0.75)
    stitch.add_argument("--ransac-thresh", type=float, default=3.0)
    stitch.add_argument("--alpha", type=float, default=1.0)
    stitch.add_argument("--max-features", type=int, default=1500)
    stitch.add_argument("--no-filter-stretch", action="store_true")
    stitch.add_argument("--no-filter-flips", action="store_true")
    stitch.add_argument("--stretch-reference", choices=["origin", "identity"], default="origin",
                        help="cluster reference point for the stretch filter")
    stitch.add_argument("--kmax", type=int, default=8)
    stitch.add_argument("--seed", type=int, default=0)
    stitch.add_argument("--style", choices=OVERLAY_STYLES, default="boxes")
    stitch.add_argument("--min-confidence", type=float, default=0.0)
    stitch.add_argument("--labels", default=None, help="comma-separated label filter")
    stitch.add_argument("--highlight-frame", type=int, default=None)
    stitch.add_argument("--out", required=True, help="output directory")

    an = sub.add_parser("analytics", help="export timeline analytics for a session")
    an.add_argument("--session", required=True)
    an.add_argument("--iou-threshold", type=float, default=0.5)
    an.add_argument("--missing-frames", type=int, default=15)
    an.add_argument("--panorama", default=None,
                    help="panorama.json from a stitch run; enables distance series")
    an.add_argument("--out", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default=os.environ.get("PANOVIS_HOST", "127.0.0.1"))
    serve.add_argument("--port", type=int, default=int(os.environ.get("PANOVIS_PORT", "8877")))
    serve.add_argument("--roots", action="append", default=None,
                       help="allowed session root (repeatable; default: unrestricted)")
    serve.add_argument("--cache-size", type=int,
                       default=int(os.environ.get("PANOVIS_CACHE_SIZE", "8")))
    serve.add_argument("--seed", type=int, default=int(os.environ.get("PANOVIS_SEED", "0")))
    return parser


def cmd_stitch(args: argparse.Namespace) -> int:
    out = Path(args.out)
    try:
        session = load_session(args.session)
        params = PanoramaParams(
            frame_range=args.frame_range,
            base_frame_id=args.base,
            detector_kind=args.detector,
            lowe_ratio=args.lowe_ratio,
            ransac_thresh=args.ransac_thresh,
            alpha=args.alpha,
            stretch_filter=not args.no_filter_stretch,
            flip_filter=not args.no_filter_flips,
            seed=args.seed,
            sample_stride=args.stride,
            max_features=args.max_features,
            k_max=args.kmax,
            stretch_reference=(
                IDENTITY_REFERENCE if args.stretch_reference == "identity" else ORIGIN_REFERENCE
            ),
        )
        panorama = build_panorama(session, params)
        spec = OverlaySpec(
            style=args.style,
            min_confidence=args.min_confidence,
            label_filter=frozenset(args.labels.split(",")) if args.labels else None,
            highlighted_frame=args.highlight_frame,
        )
        spec.validate()
        transformed = transform_detections(panorama, session.predictions)
        overlay = render_overlay(panorama, transformed, spec)
    except InvalidRange as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    except PanovisError as exc:
        return _fail(exc)

    out.mkdir(parents=True, exist_ok=True)
    (out / "panorama.png").write_bytes(encode_png(panorama.image))
    (out / "overlay.png").write_bytes(encode_png(overlay))
    (out / "panorama.json").write_text(dump_json(panorama_report(panorama)), encoding="utf-8")
    return 0


def cmd_analytics(args: argparse.Namespace) -> int:
    out = Path(args.out)
    try:
        session = load_session(args.session)
        doc = analytics_document(
            session,
            iou_threshold=args.iou_threshold,
            missing_threshold=args.missing_frames,
        )
        if args.panorama is not None:
            report = json.loads(Path(args.panorama).read_text(encoding="utf-8"))
            series = report_distance_series(report, session)
            doc["distance"] = {"panorama_id": None, "series": series_json(series)}
    except PanovisError as exc:
        return _fail(exc)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(exc, code=type(exc).__name__)

    out.mkdir(parents=True, exist_ok=True)
    (out / "analytics.json").write_text(dump_json(doc), encoding="utf-8")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    roots = args.roots
    if roots is None and os.environ.get("PANOVIS_ROOTS"):
        roots = os.environ["PANOVIS_ROOTS"].split(os.pathsep)
    config = ServiceConfig(
        session_roots=tuple(Path(r) for r in roots) if roots else None,
        cache_size=args.cache_size,
        default_seed=args.seed,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "stitch":
        return cmd_stitch(args)
    if args.command == "analytics":
        return cmd_analytics(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
