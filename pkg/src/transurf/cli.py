"""Batch command line front-end.

Subcommands: theorem-verify (opacity sweep), bake (scene to grid file),
extract (envelope + projection, or the zero-iso baseline), eval
(chamfer / completeness between meshes or against an analytic scene),
slice (field cross-section images).

Exit codes: 0 success, 1 verification or evaluation failure, 2 usage,
3 I/O or file-format error.

Scene files are JSON::

    {
      "bbox": [[-0.6, -0.6, -0.6], [0.6, 0.6, 0.6]],
      "components": [
        {"type": "sphere", "center": [0, 0, 0], "radius": 0.5,
         "material": "transparent", "m": 0.003},
        {"type": "box", "center": [0, 0, -0.15],
         "half_extents": [0.35, 0.35, 0.15], "material": "opaque"}
      ]
    }

A transparent component may replace "m" with "alpha" plus an
"alpha_ref" object {"s": ..., "d0": ...}; the offset is then derived
by inverting the closed-form opacity at that reference.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import io as io_mod
from . import metrics as metrics_mod
from .envelope import ExtractionConfig, TriangleMesh, marching_cubes, zero_iso_baseline
from .field import (
    OPAQUE,
    TRANSPARENT,
    AbsField,
    Box,
    ComposedScene,
    Cylinder,
    GridField,
    Plane,
    SceneComponent,
    ScalarField,
    Sphere,
    absolute_field,
    bake_grid,
    m_from_alpha,
)
from .projection import ProjectionConfig, extract_unbiased_surface
from .render import sweep_configs, verify_sweep

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3

_PRIMITIVE_KEYS = {
    "sphere": ("center", "radius"),
    "box": ("center", "half_extents"),
    "cylinder": ("axis_point", "axis_dir", "radius", "half_height"),
    "plane": ("point", "normal"),
}


class SceneSpecError(ValueError):
    """Scene description file is syntactically or semantically invalid."""


@dataclass
class SceneSpec:
    """Parsed scene description, convertible to a ComposedScene."""

    bbox: list
    components: list

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        if not isinstance(data, dict):
            raise SceneSpecError("scene file must contain a JSON object")
        if "bbox" not in data:
            raise SceneSpecError("scene is missing 'bbox'")
        comps = data.get("components")
        if not isinstance(comps, list) or not comps:
            raise SceneSpecError("scene needs a non-empty 'components' list")
        return cls(bbox=data["bbox"], components=comps)

    @classmethod
    def load(cls, path) -> "SceneSpec":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SceneSpecError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def build(self) -> ComposedScene:
        built = []
        for i, entry in enumerate(self.components):
            try:
                built.append(_build_component(entry))
            except (SceneSpecError, ValueError, TypeError, KeyError) as exc:
                raise SceneSpecError(f"component {i}: {exc}") from exc
        try:
            return ComposedScene(built, bbox=self.bbox)
        except ValueError as exc:
            raise SceneSpecError(str(exc)) from exc


def _build_component(entry: dict) -> SceneComponent:
    if not isinstance(entry, dict):
        raise SceneSpecError("component entries must be JSON objects")
    kind = entry.get("type")
    if kind not in _PRIMITIVE_KEYS:
        raise SceneSpecError(
            f"unknown primitive type {kind!r}; expected one of {sorted(_PRIMITIVE_KEYS)}"
        )
    kwargs = {}
    for key in _PRIMITIVE_KEYS[kind]:
        if key not in entry:
            raise SceneSpecError(f"{kind} needs field {key!r}")
        kwargs[key] = entry[key]
    prim = {
        "sphere": Sphere,
        "box": Box,
        "cylinder": Cylinder,
        "plane": Plane,
    }[kind](**kwargs)

    material = entry.get("material", OPAQUE)
    if material == OPAQUE:
        return SceneComponent(prim, material=OPAQUE)
    if material != TRANSPARENT:
        raise SceneSpecError(f"unknown material {material!r}")
    if "m" in entry and "alpha" in entry:
        raise SceneSpecError("give either 'm' or 'alpha', not both")
    if "m" in entry:
        return SceneComponent(prim, material=TRANSPARENT, m=float(entry["m"]))
    if "alpha" in entry:
        ref = entry.get("alpha_ref")
        if not isinstance(ref, dict) or "s" not in ref or "d0" not in ref:
            raise SceneSpecError(
                "'alpha' needs an 'alpha_ref' object with 's' and 'd0'"
            )
        m = m_from_alpha(float(entry["alpha"]), float(ref["s"]), float(ref["d0"]))
        return SceneComponent(prim, material=TRANSPARENT, m=m)
    raise SceneSpecError("transparent component needs 'm' or 'alpha'")


def _parse_floats(text: str, flag: str) -> list:
    items = [t for t in text.split(",") if t.strip() != ""]
    if not items:
        raise argparse.ArgumentTypeError(f"{flag} needs at least one value")
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad {flag} value: {exc}")


def _load_field_input(args, parser) -> ScalarField:
    """Scene JSON or grid file, whichever flag was given."""
    if getattr(args, "scene", None) and getattr(args, "grid", None):
        parser.error("give --scene or --grid, not both")
    if getattr(args, "scene", None):
        return SceneSpec.load(args.scene).build()
    if getattr(args, "grid", None):
        return io_mod.read_grid(args.grid)
    parser.error("an input is required: --scene scene.json or --grid field.anfd")


def _field_bbox(fld, args, parser):
    if getattr(args, "bbox", None):
        vals = _parse_floats(args.bbox, "--bbox")
        if len(vals) != 6:
            parser.error("--bbox needs 6 comma-separated numbers: x0,y0,z0,x1,y1,z1")
        return [vals[:3], vals[3:]]
    bbox = getattr(fld, "bbox", None)
    if bbox is None:
        parser.error("input carries no bounding box; pass --bbox")
    return bbox


def cmd_theorem_verify(args, parser) -> int:
    s_list = args.s_list if args.s_list else [20.0, 50.0, 100.0, 200.0]
    d0_list = args.d0_list if args.d0_list else [0.5, 1.0, 2.0]
    m_list = (
        args.m_list
        if args.m_list
        else [-0.2, -0.1, -0.01, 0.0, 0.01, 0.1, 0.2]
    )
    reports = verify_sweep(
        s_list, d0_list, m_list,
        step=args.step, tol_alpha=args.tol, cos_theta=args.cos_theta,
    )
    if args.out:
        io_mod.write_sweep_csv(reports, args.out)
    failures = [r for r in reports if not r.passed]
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(
            f"{status} s={r.cfg.s:g} d0={r.cfg.d0:g} m={r.cfg.m:g} "
            f"|dalpha|={abs(r.alpha_quad - r.alpha_closed):.3e} "
            f"|dt|={abs(r.t_star - r.t_expected):.3e}"
        )
    print(f"{len(reports) - len(failures)}/{len(reports)} cases passed")
    if failures:
        print(f"{len(failures)} case(s) failed tolerance {args.tol:g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bake(args, parser) -> int:
    scene = SceneSpec.load(args.scene).build()
    bbox = _field_bbox(scene, args, parser)
    fld = absolute_field(scene) if args.field == "abs" else scene
    dtype = np.float32 if args.dtype == "f32" else np.float64
    grid = bake_grid(fld, bbox, (args.res, args.res, args.res), dtype=dtype)
    io_mod.write_grid(grid, args.out)
    print(f"baked {args.res}^3 {args.field} field -> {args.out}")
    return EXIT_OK


def cmd_extract(args, parser) -> int:
    fld = _load_field_input(args, parser)
    bbox = _field_bbox(fld, args, parser)
    if args.mode != "zero-iso" and args.iso <= 0.0:
        parser.error("--iso must be positive for envelope modes (abs, raw)")
    ecfg = ExtractionConfig(
        bbox=bbox,
        resolution=args.res,
        iso=args.iso if args.mode != "zero-iso" else 0.0,
        refine=args.refine,
    )
    if args.mode == "zero-iso":
        mesh = zero_iso_baseline(fld, ecfg)
        if mesh.n_faces == 0:
            print(
                "warning: zero level set is empty (no sign change in the field)",
                file=sys.stderr,
            )
        io_mod.write_obj(mesh, args.out)
        print(f"baseline mesh: {mesh.n_vertices} vertices, {mesh.n_faces} faces -> {args.out}")
        return EXIT_OK

    pcfg = ProjectionConfig(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        epochs1=args.epochs1,
        epochs2=args.epochs2,
        step_size=args.step_size,
    )
    fa = absolute_field(fld)
    target = fld if args.mode == "raw" else fa
    result = extract_unbiased_surface(fa, ecfg, pcfg, project_field=target)
    io_mod.write_obj(result.mesh, args.out)
    if result.mesh.n_faces == 0:
        print("warning: envelope is empty at this iso level", file=sys.stderr)
    loss_path = args.loss_out
    if loss_path is None and result.stage1 is not None:
        stem = str(args.out)
        stem = stem[:-4] if stem.endswith(".obj") else stem
        loss_path = stem + "_loss.csv"
    if result.stage1 is not None and loss_path:
        history = result.stage1.loss_history
        if result.stage2 is not None:
            history = np.vstack([history, result.stage2.loss_history])
        io_mod.write_loss_csv(history, loss_path)
        print(f"loss history -> {loss_path}")
    print(f"{args.mode} mesh: {result.mesh.n_vertices} vertices, {result.mesh.n_faces} faces -> {args.out}")
    return EXIT_OK


def cmd_eval(args, parser) -> int:
    if bool(args.gt) == bool(args.gt_scene):
        parser.error("give exactly one of --gt mesh.obj or --gt-scene scene.json")
    rec_mesh = io_mod.read_obj(args.rec)
    if rec_mesh.n_faces == 0:
        print(f"evaluation failed: {args.rec} has no faces", file=sys.stderr)
        return EXIT_FAIL
    rec_pts = metrics_mod.sample_surface(rec_mesh, args.samples, seed=args.seed + 1)
    if args.gt:
        gt_mesh = io_mod.read_obj(args.gt)
        if gt_mesh.n_faces == 0:
            print(f"evaluation failed: {args.gt} has no faces", file=sys.stderr)
            return EXIT_FAIL
        gt_pts = metrics_mod.sample_surface(gt_mesh, args.samples, seed=args.seed)
    else:
        scene = SceneSpec.load(args.gt_scene).build()
        gt_pts = metrics_mod.sample_scene_surface(scene, args.samples, seed=args.seed)

    report = metrics_mod.chamfer(gt_pts, rec_pts)
    thresholds = args.thresholds if args.thresholds else [0.0025, 0.005, 0.01]
    curve = metrics_mod.completeness_curve(gt_pts, rec_pts, thresholds)
    scaled = report.scaled()
    print(f"g2d      {scaled['g2d']:.4f} x1e-3")
    print(f"d2g      {scaled['d2g']:.4f} x1e-3")
    print(f"chamfer  {scaled['chamfer']:.4f} x1e-3")
    for t, c in zip(thresholds, curve):
        print(f"completeness@{t:g}  {c:.4f}")
    if args.out:
        io_mod.write_metrics_csv(report, args.out, thresholds, curve)
        print(f"metrics -> {args.out}")
    return EXIT_OK


def cmd_slice(args, parser) -> int:
    fld = _load_field_input(args, parser)
    bbox = _field_bbox(fld, args, parser)
    if args.field == "abs":
        fld = absolute_field(fld)
    iso = args.iso if args.iso else []
    io_mod.write_slice(
        fld, args.axis, args.offset, args.res, args.out,
        iso_overlays=iso, bbox=bbox,
    )
    print(f"slice {args.axis}={args.offset:g} -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transurf",
        description="Opacity verification and unbiased surface extraction "
        "for mixed opaque/transparent distance fields.",
    )
    parser.add_argument(
        "--serial",
        action="store_true",
        help="single-threaded nearest-neighbor reductions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theorem-verify", help="opacity + weight-argmax sweep")
    p.add_argument("--s-list", type=lambda t: _parse_floats(t, "--s-list"), default=None)
    p.add_argument("--d0-list", type=lambda t: _parse_floats(t, "--d0-list"), default=None)
    p.add_argument("--m-list", type=lambda t: _parse_floats(t, "--m-list"), default=None)
    p.add_argument("--cos-theta", type=float, default=-1.0)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", default=None, help="per-case CSV report")
    p.set_defaults(func=cmd_theorem_verify)

    p = sub.add_parser("bake", help="sample a scene to a grid file")
    p.add_argument("--scene", required=True)
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--bbox", default=None, help="x0,y0,z0,x1,y1,z1 override")
    p.add_argument("--field", choices=["raw", "abs"], default="raw")
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("extract", help="envelope + projection, or baseline")
    p.add_argument("--scene", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--mode", choices=["abs", "raw", "zero-iso"], default="abs")
    p.add_argument("--iso", type=float, default=0.005)
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--refine", type=int, default=None)
    p.add_argument("--bbox", default=None)
    p.add_argument("--lambda1", type=float, default=500.0)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.add_argument("--epochs1", type=int, default=300)
    p.add_argument("--epochs2", type=int, default=100)
    p.add_argument("--step-size", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="chamfer + completeness")
    p.add_argument("--gt", default=None)
    p.add_argument("--gt-scene", default=None)
    p.add_argument("--rec", required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--thresholds", type=lambda t: _parse_floats(t, "--thresholds"), default=None
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("slice", help="cross-section image of a field")
    p.add_argument("--scene", default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--field", choices=["raw", "abs"], default="raw")
    p.add_argument("--axis", default="z")
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--res", type=int, default=512)
    p.add_argument("--iso", type=lambda t: _parse_floats(t, "--iso"), default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    if args.serial:
        metrics_mod.set_workers(1)
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        # parser.error inside a command
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    except (io_mod.FormatError, SceneSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: cannot open {exc.filename}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
