"""Command-line surface of the toolkit.

Subcommands: synth (fixture generator), estimate, design, filter, detect,
track, report.  Exit codes: 0 ok, 1 usage/configuration error, 2 input
parse error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .errors import (
    EXIT_INPUT,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    ImageFormatError,
    NumericError,
    ResofiltError,
)
from .filtering import apply_filter, design_filter
from .harmonic import synth_texture
from .imageio import ImageStack, draw_boxes, read_image, write_image
from .model_doc import RunReport, doc_to_model, dump_json, load_json, model_to_doc
from .pipeline import PipelineConfig, _diag_doc, estimate_model, run_pipeline


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated integers")
    return tuple(int(p) for p in parts)


def _int_quad(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected four comma-separated integers")
    return tuple(int(p) for p in parts)


def _pair_spec(text: str):
    parts = text.split(",")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("expected fx,fy,amplitude[,phase]")
    fx, fy, amp = (float(p) for p in parts[:3])
    phase = float(parts[3]) if len(parts) == 4 else 0.0
    return (fx, fy, amp, phase)


def _add_common_estimation(p: _Parser):
    p.add_argument("--base", type=_int_quad, default=(0, 0, 64, 64),
                   metavar="ROW,COL,H,W", help="base region (default 0,0,64,64)")
    p.add_argument("--order", type=_int_pair, default=(16, 16), metavar="P,Q",
                   help="model order per axis (default 16,16)")
    p.add_argument("--estimator", choices=("ls", "pencil"), default="ls")
    p.add_argument("--split", type=int, default=None,
                   help="splitting parameter of the pencil estimator")
    p.add_argument("--plain", action="store_true",
                   help="plain (non-palindromic) coefficient solve")
    p.add_argument("--no-dc", action="store_true", help="do not add a unit root")
    p.add_argument("--no-project", action="store_true",
                   help="keep raw root moduli (no unit-circle projection)")


def _config_from_args(args, post: str = "none") -> PipelineConfig:
    return PipelineConfig(
        base_region=args.base,
        order=args.order,
        estimator=args.estimator,
        symmetric=not args.plain,
        channel_mode=getattr(args, "channels", "gray"),
        sigma_multiplier=getattr(args, "multiplier", 3.0),
        min_area=getattr(args, "min_area", 4),
        dc_root=not args.no_dc,
        project_roots=not args.no_project,
        split=args.split,
        post=post,
        hist_epsilon=getattr(args, "hist_epsilon", None),
        track_window=getattr(args, "window", 3),
        track_threshold=getattr(args, "threshold", 0.3),
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="resofilt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic texture")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=_int_pair, default=(128, 128), metavar="NX,NY")
    p.add_argument("--pair", type=_pair_spec, action="append", default=[],
                   metavar="FX,FY,AMP[,PHASE]", help="harmonic pair (repeatable)")
    p.add_argument("--mean", type=float, default=128.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch", type=_int_quad, default=None, metavar="ROW,COL,H,W",
                   help="insert a constant patch")
    p.add_argument("--patch-value", type=float, default=200.0)
    p.add_argument("--frames", type=int, default=1,
                   help="emit N frames; --out must contain {i}")

    p = sub.add_parser("estimate", help="estimate the resonance model")
    p.add_argument("--input", required=True)
    _add_common_estimation(p)
    p.add_argument("--model-out", default=None)
    p.add_argument("--report-out", default=None, help="diagnostics dump")

    p = sub.add_parser("design", help="estimate and design per-channel filters")
    p.add_argument("--input", required=True)
    _add_common_estimation(p)
    p.add_argument("--channels", choices=("gray", "rgb"), default="gray")
    p.add_argument("--e-policy", default="mean",
                   help="'mean', 'zero', or an explicit number")
    p.add_argument("--model-out", required=True)

    p = sub.add_parser("filter", help="apply designed filters to an image")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", help="full anomaly-detection run on one image")
    p.add_argument("--input", required=True)
    _add_common_estimation(p)
    p.add_argument("--channels", choices=("gray", "rgb"), default="gray")
    p.add_argument("--multiplier", type=float, default=3.0)
    p.add_argument("--min-area", dest="min_area", type=int, default=4)
    p.add_argument("--post", choices=("hist", "none"), default="hist")
    p.add_argument("--hist-epsilon", dest="hist_epsilon", type=float, default=None,
                   help="evidence threshold (default: mean + 2 std policy)")
    p.add_argument("--mask-out", default=None)
    p.add_argument("--overlay-out", default=None)
    p.add_argument("--report-out", default=None)
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report")

    p = sub.add_parser("track", help="dynamic run over consecutive frames")
    p.add_argument("--inputs", nargs="+", required=True)
    _add_common_estimation(p)
    p.add_argument("--channels", choices=("gray", "rgb"), default="gray")
    p.add_argument("--multiplier", type=float, default=3.0)
    p.add_argument("--min-area", dest="min_area", type=int, default=4)
    p.add_argument("--window", type=int, default=3, help="frame window L")
    p.add_argument("--threshold", type=float, default=0.3, help="correlation threshold")
    p.add_argument("--report-out", default=None)

    p = sub.add_parser("report", help="pretty-print a report or model document")
    p.add_argument("--path", required=True)

    return parser


def _cmd_synth(args) -> int:
    nx, ny = args.size
    image = synth_texture(args.pair, nx, ny, noise_sigma=0.0, mean=args.mean)
    if args.patch is not None:
        r, c, h, w = args.patch
        image[r : r + h, c : c + w] = args.patch_value
    if args.frames == 1:
        out = image.copy()
        if args.noise:
            out += np.random.default_rng(args.seed).normal(0, args.noise, out.shape)
        write_image(args.out, ImageStack((out,)))
        return EXIT_OK
    if "{i}" not in args.out:
        raise ConfigError("frames: --out must contain '{i}' when --frames > 1")
    for i in range(args.frames):
        out = image.copy()
        if args.noise:
            out += np.random.default_rng(args.seed + i).normal(0, args.noise, out.shape)
        write_image(args.out.replace("{i}", str(i)), ImageStack((out,)))
    return EXIT_OK


def _cmd_estimate(args) -> int:
    stack = read_image(args.input)
    config = _config_from_args(args)
    config.validate(image_shape=stack.shape)
    x, y, h, w = config.base_region
    base = ImageStack(tuple(p[x : x + h, y : y + w] for p in stack.planes)).gray()
    model, diag = estimate_model(base, config)
    doc = model_to_doc(model, extra=_diag_doc(diag))
    text = dump_json(doc, args.model_out)
    if args.report_out:
        dump_json(doc.get("diagnostics", {}), args.report_out)
    if not args.model_out:
        print(text)
    return EXIT_OK


def _cmd_design(args) -> int:
    stack = read_image(args.input)
    config = _config_from_args(args)
    config.validate(image_shape=stack.shape)
    x, y, h, w = config.base_region
    base_stack = ImageStack(tuple(p[x : x + h, y : y + w] for p in stack.planes))
    model, diag = estimate_model(base_stack.gray(), config)
    policy = args.e_policy
    if policy not in ("mean", "zero"):
        policy = float(policy)
    if args.channels == "gray":
        planes, names = [base_stack.gray()], ["gray"]
    else:
        src = base_stack.planes if base_stack.channels == 3 else base_stack.planes * 3
        planes, names = list(src[:3]), ["r", "g", "b"]
    filters = [
        design_filter(plane, model, e_policy=policy, channel=name)
        for plane, name in zip(planes, names)
    ]
    dump_json(model_to_doc(model, filters, extra=_diag_doc(diag)), args.model_out)
    return EXIT_OK


def _cmd_filter(args) -> int:
    stack = read_image(args.input)
    model, filters = doc_to_model(load_json(args.model))
    if not filters:
        raise ConfigError("model: the document carries no designed filters")
    if len(filters) == 1:
        planes = [stack.gray()]
    else:
        planes = list(stack.planes[:3]) if stack.channels == 3 else [stack.gray()] * 3
    filtered = [apply_filter(p, f) for p, f in zip(planes, filters)]
    write_image(args.out, ImageStack(tuple(filtered)))
    return EXIT_OK


def _run_and_write(args, frames, post: str) -> int:
    config = _config_from_args(args, post=post)
    t0 = time.perf_counter()
    result = run_pipeline(config, frames)
    result.report.timings["total_s"] = time.perf_counter() - t0
    if getattr(args, "mask_out", None):
        mask = result.masks[0]
        write_image(args.mask_out, ImageStack(tuple(mask.values)))
    if getattr(args, "overlay_out", None):
        boxes = result.confirmed[0] if result.confirmed else []
        write_image(args.overlay_out, draw_boxes(frames[0], boxes))
    if getattr(args, "report_out", None):
        include = bool(getattr(args, "timings", False))
        dump_json(result.report.to_doc(include_timings=include), args.report_out)
    for frame_doc in result.report.frames:
        kept = frame_doc["confirmed"]
        print(f"frame {frame_doc['frame']}: {len(frame_doc['boxes'])} candidates, "
              f"{len(kept)} confirmed")
        for box in kept:
            print(f"  box x0={box['x0']} y0={box['y0']} x1={box['x1']} y1={box['y1']}")
    return EXIT_OK


def _cmd_detect(args) -> int:
    stack = read_image(args.input)
    return _run_and_write(args, [stack], post=args.post)


def _cmd_track(args) -> int:
    frames = [read_image(path) for path in args.inputs]
    return _run_and_write(args, frames, post="track")


def _cmd_report(args) -> int:
    doc = load_json(args.path)
    if doc.get("kind") == "run-report":
        report = RunReport.from_doc(doc)
        print(f"run report: {len(report.frames)} frame record(s)")
        print(f"model order: {report.model.get('order')}")
        for frame_doc in report.frames:
            print(f"frame {frame_doc['frame']}: {len(frame_doc.get('boxes', []))} candidates, "
                  f"{len(frame_doc.get('confirmed', []))} confirmed")
    elif doc.get("kind") == "resonance-model":
        model, filters = doc_to_model(doc)
        print(f"resonance model: order {doc['order']}, "
              f"fit residual {doc['fit_residual']:.3g}, {len(filters)} filter(s)")
        for f in filters:
            print(f"  channel {f.channel}: flat level {f.flat_level:.4g}, "
                  f"sigma2 {f.sigma2:.4g}")
    else:
        raise ImageFormatError(f"unknown document kind {doc.get('kind')!r}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "estimate": _cmd_estimate,
    "design": _cmd_design,
    "filter": _cmd_filter,
    "detect": _cmd_detect,
    "track": _cmd_track,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"resofilt: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ImageFormatError as exc:
        print(f"resofilt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"resofilt: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ResofiltError as exc:
        print(f"resofilt: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
