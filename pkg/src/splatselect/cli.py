"""Headless command-line entry points: segment, eval, orient, extract, serve.

Exit codes: 0 success, 1 engine error, 2 argument error. Errors go to
stderr; results and progress to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatselect",
        description="Interactive selection and segmentation for Gaussian splat scenes",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap numeric-library parallelism")
    parser.add_argument("--seed", type=int, default=None,
                        help="accepted for forward compatibility; the pipeline is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="run automatic tracked segmentation")
    seg.add_argument("--scene", required=True)
    seg.add_argument("--mask", action="append", required=True,
                     help="8-bit grayscale mask PNG; repeatable")
    seg.add_argument("--camera", action="append", required=True,
                     help="camera JSON matching each --mask; repeatable")
    seg.add_argument("--views", default="turnaround",
                     help="'turnaround' or 'train:CAMS' (JSON file or directory)")
    seg.add_argument("--m", type=int, default=50, help="number of dense views")
    seg.add_argument("--no-presegment", action="store_true")
    seg.add_argument("--occluded", action="store_true",
                     help="do not treat the input masks as occlusion-free")
    seg.add_argument("--provider", default="geometric",
                     help="geometric | replay:DIR | cmd:COMMAND | jobdir:DIR")
    seg.add_argument("--out", required=True, help="output selection sidecar (.gsel)")

    ev = sub.add_parser("eval", help="run a benchmark manifest")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", required=True, help="JSONL results path")

    orient = sub.add_parser("orient", help="PCA-align a scene from a selection")
    orient.add_argument("--scene", required=True)
    orient.add_argument("--selection", required=True)
    orient.add_argument("--map", required=True, help="e.g. pc3=z,pc1=x")
    orient.add_argument("--out", required=True)

    ext = sub.add_parser("extract", help="export selected Gaussians as a scene file")
    ext.add_argument("--scene", required=True)
    ext.add_argument("--selection", required=True)
    ext.add_argument("--invert", action="store_true")
    ext.add_argument("--out", required=True)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--listen", default="127.0.0.1:8000")
    serve.add_argument("--max-sessions", type=int, default=32)
    serve.add_argument("--provider", action="append", default=[],
                       help="register NAME=SPEC (e.g. tracker=cmd:run_tracker.sh)")
    return parser


def _cmd_segment(args) -> int:
    from .autoseg import ReferenceMask, segment_auto
    from .cameras import load_camera, load_cameras
    from .evalkit import make_provider_factory
    from .selection import load_mask, save_selection
    from .scene import load_scene

    if len(args.mask) != len(args.camera):
        print("error: need one --camera per --mask", file=sys.stderr)
        return 2
    scene = load_scene(args.scene)
    user_masks = []
    for mask_path, cam_path in zip(args.mask, args.camera):
        cam = load_camera(cam_path)
        user_masks.append(
            ReferenceMask(load_mask(mask_path, cam, occlusion_free=not args.occluded))
        )

    training_cameras = None
    view_source = "turnaround"
    if args.views.startswith("train:"):
        training_cameras = load_cameras(args.views.split(":", 1)[1])
        view_source = "training_subset"
    elif args.views != "turnaround":
        print(f"error: unknown --views {args.views!r}", file=sys.stderr)
        return 2

    result = segment_auto(
        scene,
        user_masks,
        view_source=view_source,
        m=args.m,
        provider=make_provider_factory(args.provider),
        presegment=not args.no_presegment,
        training_cameras=training_cameras,
    )
    save_selection(result.selection, args.out)
    print(f"selected {result.selection.popcount()} of {scene.count} gaussians "
          f"in {result.elapsed:.2f}s -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .evalkit import run_benchmark

    records, table = run_benchmark(args.manifest, args.out)
    print(table)
    print(f"{len(records)} records -> {args.out}")
    return 0


def _cmd_orient(args) -> int:
    from .orient import AxisMapping, orient_scene
    from .scene import load_scene, save_scene
    from .selection import load_selection

    scene = load_scene(args.scene)
    sel = load_selection(args.selection)
    oriented = orient_scene(scene, sel, AxisMapping.parse(args.map))
    save_scene(oriented, args.out)
    print(f"oriented scene written to {args.out}")
    return 0


def _cmd_extract(args) -> int:
    from .scene import load_scene
    from .selection import export_selection, load_selection

    scene = load_scene(args.scene)
    sel = load_selection(args.selection)
    written = export_selection(scene, sel, args.out, invert=args.invert)
    print(f"wrote {written} gaussians to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    providers = {}
    for entry in args.provider:
        name, _, spec = entry.partition("=")
        if not spec:
            print(f"error: --provider needs NAME=SPEC, got {entry!r}", file=sys.stderr)
            return 2
        providers[name] = spec
    host, _, port = args.listen.rpartition(":")
    app = create_app(max_sessions=args.max_sessions, providers=providers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMBA_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .errors import EngineError

    handler = {
        "segment": _cmd_segment,
        "eval": _cmd_eval,
        "orient": _cmd_orient,
        "extract": _cmd_extract,
        "serve": _cmd_serve,
    }[args.command]
    try:
        return handler(args)
    except (EngineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
