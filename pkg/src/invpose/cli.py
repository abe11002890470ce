"""Command-line interface.

Exit codes: 0 success, 2 configuration or parse error, 3 numerical error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, NumericalError
from .harness import LandscapeSpec, MaskSpec, generate_mask, landscape_csv, run_landscape
from .images import read_photo, write_aimg, write_gray, write_mask
from .loss import MaskMode, pose_loss_report
from .mesh import load_mesh, save_mesh
from .optimize import SimplexConfig, estimate_pose
from .posecam import CameraConfig, load_pose
from .raster import Lighting, rasterize_attributes, shade
from .shapes import SHAPES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def load_lighting(path) -> Lighting:
    """Read ``{"I_a", "I_d", "L", "I_0"}`` (or raw ``{"A", "b"}``) lighting JSON."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        if "A" in doc:
            return Lighting(doc["A"], doc["b"])
        L = doc["L"]
        if len(L) != 3:
            raise ValueError("L must have 3 components")
        return Lighting.from_components(float(doc["I_a"]), float(doc["I_d"]), L, float(doc.get("I_0", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid lighting JSON ({exc})") from None


def _camera(args) -> CameraConfig:
    return CameraConfig((args.width, args.height))


def _mesh(args):
    return load_mesh(args.mesh, require_meta=True)


def _photo(args):
    return read_photo(args.photo, getattr(args, "mask", None))


def _mask_mode(args) -> MaskMode:
    if args.mask_mode is not None:
        return MaskMode.parse(args.mask_mode)
    return MaskMode.PHOTO_MASK if args.mask is not None else MaskMode.MODEL_SILHOUETTE


def cmd_render(args) -> None:
    attrs = rasterize_attributes(_mesh(args), load_pose(args.pose), _camera(args))
    img = shade(attrs, load_lighting(args.light), background=args.bg)
    write_gray(args.out, img.channels[:, :, 0], bits=args.bits)


def cmd_attributes(args) -> None:
    write_aimg(args.out, rasterize_attributes(_mesh(args), load_pose(args.pose), _camera(args)))


def cmd_loss(args) -> None:
    photo = _photo(args)
    cam = CameraConfig(photo.dims)
    report = pose_loss_report(photo, _mesh(args), load_pose(args.pose), cam, _mask_mode(args))
    sys.stdout.write(_dumps(report.to_json()))


def cmd_fit_light(args) -> None:
    photo = _photo(args)
    cam = CameraConfig(photo.dims)
    report = pose_loss_report(photo, _mesh(args), load_pose(args.pose), cam, _mask_mode(args))
    light = report.lighting
    doc = dict(light.components()) if light.A.shape == (1, 4) else {}
    doc["A"] = light.A.tolist()
    doc["b"] = light.b.tolist()
    doc["loss"] = report.loss
    sys.stdout.write(_dumps(doc))


def _param_pair(text: str) -> tuple[int, int]:
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated indices, e.g. 0,1") from None
    return i, j


def cmd_landscape(args) -> None:
    photo = _photo(args)
    cam = CameraConfig(photo.dims)
    spec = LandscapeSpec(args.params[0], args.params[1], args.range, args.steps)
    cells = run_landscape(photo, _mesh(args), load_pose(args.pose), spec, cam, _mask_mode(args))
    _write_text(args.out, landscape_csv(cells))


def cmd_estimate(args) -> None:
    photo = _photo(args)
    cam = CameraConfig(photo.dims)
    cfg = SimplexConfig(restarts=args.restarts, max_evals=args.max_evals)
    res = estimate_pose(photo, _mesh(args), load_pose(args.init), cam, cfg, _mask_mode(args),
                        optimize_focal=not args.fixed_focal)
    _write_text(args.out, _dumps(res.to_json()))
    if args.trace:
        rows = ["iter,loss,diameter"] + [f"{k},{loss:.9g},{diam:.9g}" for k, (loss, diam) in enumerate(res.trace)]
        _write_text(args.trace, "\n".join(rows) + "\n")


def cmd_genmask(args) -> None:
    mask = generate_mask(_mesh(args), load_pose(args.pose), _camera(args), MaskSpec(args.margin))
    write_mask(args.out, mask)


def cmd_mesh(args) -> None:
    save_mesh(SHAPES[args.shape](), args.out)


def _add_size(p) -> None:
    p.add_argument("--width", type=int, default=DEFAULT_WIDTH, help="image width in pixels")
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT, help="image height in pixels")


def _add_photo_inputs(p, pose_flag: str = "--pose") -> None:
    p.add_argument("--photo", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument(pose_flag, required=True, dest=pose_flag.lstrip("-"))
    p.add_argument("--mask", default=None, help="foreground mask image (nonzero = foreground)")
    p.add_argument("--mask-mode", default=None, choices=["silhouette", "full", "photo"],
                   help="pixel population (default: photo if --mask is given, else silhouette)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invpose", description="Illumination-invariant model-based pose estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a synthetic grayscale photo")
    p.add_argument("--mesh", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--light", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bg", type=float, default=0.0, help="background intensity")
    p.add_argument("--bits", type=int, default=16, choices=[8, 16])
    _add_size(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("attributes", help="write the projected attribute image")
    p.add_argument("--mesh", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--out", required=True)
    _add_size(p)
    p.set_defaults(func=cmd_attributes)

    p = sub.add_parser("loss", help="print the loss report as JSON")
    _add_photo_inputs(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("fit-light", help="print the fitted lighting as JSON")
    _add_photo_inputs(p)
    p.set_defaults(func=cmd_fit_light)

    p = sub.add_parser("landscape", help="write a two-parameter loss grid as CSV")
    _add_photo_inputs(p)
    p.add_argument("--params", type=_param_pair, required=True, help="normalized parameter indices i,j")
    p.add_argument("--range", type=float, default=0.2)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("estimate", help="refine a pose by simplex search")
    _add_photo_inputs(p, "--init")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--max-evals", type=int, default=2000, help="evaluation budget per simplex run")
    p.add_argument("--fixed-focal", action="store_true", help="keep the focal length of --init fixed")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="optional CSV of best loss and simplex diameter per iteration")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("genmask", help="write a silhouette-margin foreground mask")
    p.add_argument("--mesh", required=True)
    p.add_argument("--pose", required=True)
    p.add_argument("--margin", type=float, default=1.2)
    p.add_argument("--out", required=True)
    _add_size(p)
    p.set_defaults(func=cmd_genmask)

    p = sub.add_parser("mesh", help="write a procedural demo mesh with its sidecar")
    p.add_argument("--shape", choices=sorted(SHAPES), default="car")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
