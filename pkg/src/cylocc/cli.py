"""Command-line surface tying the library into file-based pipelines.

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 domain
error. Diagnostics go to stderr; machine-readable reports are JSON written
to --report paths or stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import lift as lift_mod
from . import synth as synth_mod
from .errors import DomainError, ShapeError
from .formats import (
    FormatError,
    decode_point_cloud,
    decode_raster,
    decode_voxel_grid,
    encode_point_cloud,
    encode_raster,
    encode_voxel_grid,
    pose_from_json,
    rig_from_json,
    scene_from_json,
    spec_from_json,
)
from .geom import UNLABELED, LabeledPointCloud, erp_depth_to_point_cloud, surround_rig
from .grid import (
    CUBOID,
    CYLINDRICAL,
    GridSpec,
    VoxelGrid,
    class_frequencies,
    default_cylindrical_spec,
    default_label_set,
    voxelize_semantic,
)
from .losses import ProbGrid, class_weights, dice_macro, scal_loss, weighted_ce
from .metrics import generate_rays, ray_iou
from .sketch import CandidateMask, DilationSchedule, dilate_radial, sketch_from_points


def _parse_spec(text: str) -> GridSpec:
    if text == "default":
        return default_cylindrical_spec()
    if text.startswith((CYLINDRICAL + ":", CUBOID + ":")):
        parts = text.split(":")
        coord = parts[0]
        dims = tuple(int(v) for v in parts[1].split("x"))
        nums = [float(v) for v in parts[2:]]
        if coord == CYLINDRICAL:
            if len(nums) != 4:
                raise DomainError("cylindrical inline spec needs rmin:rmax:zmin:zmax")
            ranges = ((nums[0], nums[1]), (-math.pi, math.pi), (nums[2], nums[3]))
        else:
            if len(nums) != 6:
                raise DomainError("cuboid inline spec needs xmin:xmax:ymin:ymax:zmin:zmax")
            ranges = ((nums[0], nums[1]), (nums[2], nums[3]), (nums[4], nums[5]))
        return GridSpec(coord, dims, ranges)
    return spec_from_json(Path(text).read_bytes())


def _parse_schedule(text: str) -> DilationSchedule | None:
    if text == "none":
        return None
    bands = []
    for part in text.split(","):
        end, window = part.split(":")
        bands.append((float(end), int(window)))
    return DilationSchedule(tuple(bands))


def _parse_angle_range(text: str) -> tuple[float, float]:
    unit = "deg"
    if text.endswith("deg"):
        text = text[:-3]
    elif text.endswith("rad"):
        text = text[:-3]
        unit = "rad"
    lo, hi = (float(v) for v in text.split(":"))
    if unit == "deg":
        lo, hi = math.radians(lo), math.radians(hi)
    return lo, hi


def _write_report(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if path is None or path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _load_grid(path: str) -> VoxelGrid:
    return decode_voxel_grid(Path(path).read_bytes())


def _cmd_info(args) -> int:
    buf = Path(args.path).read_bytes()
    magic = buf[:4]
    if magic == b"OVOX":
        g = decode_voxel_grid(buf)
        print(f"OVOX {g.spec.coord_sys} dims={g.spec.dims} ranges={g.spec.ranges}")
        print(f"payload={g.kind} channels={g.channels} voxels={g.spec.num_voxels}")
        if g.kind != "feature":
            print(f"nonzero={int(np.count_nonzero(g.data))}")
    elif magic == b"OPCD":
        c = decode_point_cloud(buf)
        print(f"OPCD points={len(c)} classes={sorted(set(c.labels.tolist()))}")
    elif magic == b"ODPT":
        r = decode_raster(buf)
        print(f"ODPT kind={r.kind} size={r.width}x{r.height} channels={r.channels}")
    else:
        raise FormatError(f"unrecognized magic {magic!r}", offset=0, fieldname="magic")
    return 0


def _cmd_synth(args) -> int:
    scene, labels = scene_from_json(Path(args.scene).read_bytes())
    rig = rig_from_json(Path(args.rig).read_bytes()) if args.rig else surround_rig()
    w, h = (int(v) for v in args.erp.split("x"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    depth, semantic = synth_mod.render_erp_depth(scene, w, h)
    (out / "depth.odpt").write_bytes(encode_raster(depth))
    (out / "semantic.odpt").write_bytes(encode_raster(semantic))
    origins = np.stack([cam.pose.translation for cam in rig])
    cloud = synth_mod.sample_scene_point_cloud(scene, origins)
    (out / "cloud.opcd").write_bytes(encode_point_cloud(cloud))
    cyl_spec = _parse_spec(args.spec)
    if cyl_spec.coord_sys != CYLINDRICAL:
        raise DomainError("synth --spec must be cylindrical; the cuboid grid is derived from it")
    cub_spec = GridSpec(
        CUBOID,
        (160, 160, 16),
        (
            (-cyl_spec.ranges[0][1], cyl_spec.ranges[0][1]),
            (-cyl_spec.ranges[0][1], cyl_spec.ranges[0][1]),
            cyl_spec.ranges[2],
        ),
    )
    for name, spec in (("gt_cylindrical.ovox", cyl_spec), ("gt_cuboid.ovox", cub_spec)):
        gt = synth_mod.analytic_voxel_gt(scene, spec, args.supersample)
        (out / name).write_bytes(encode_voxel_grid(gt))
    print(f"wrote rasters, cloud and ground truth to {out}", file=sys.stderr)
    return 0


def _cmd_voxelize(args) -> int:
    cloud = decode_point_cloud(Path(args.cloud).read_bytes())
    spec = _parse_spec(args.spec)
    labels = default_label_set()
    keep = cloud.labels != UNLABELED
    if not np.all(keep):
        print(f"dropping {int((~keep).sum())} unlabeled points", file=sys.stderr)
        cloud = LabeledPointCloud(cloud.points[keep], cloud.labels[keep])
    grid = voxelize_semantic(cloud, spec, labels)
    Path(args.out).write_bytes(encode_voxel_grid(grid))
    return 0


def _cmd_sketch(args) -> int:
    depth = decode_raster(Path(args.depth).read_bytes())
    spec = _parse_spec(args.spec)
    cloud = erp_depth_to_point_cloud(depth, None, stride=args.stride)
    mask = sketch_from_points(cloud, spec, args.min_points)
    schedule = _parse_schedule(args.schedule)
    if schedule is not None:
        mask = dilate_radial(mask, schedule)
    Path(args.out).write_bytes(encode_voxel_grid(mask.grid))
    print(
        f"sketch occupies {mask.occupied_count} voxels ({mask.occupied_fraction:.2%})",
        file=sys.stderr,
    )
    return 0


def _cmd_lift(args) -> int:
    mask = CandidateMask(_load_grid(args.mask))
    rig = rig_from_json(Path(args.rig).read_bytes())
    features = {}
    for cam in rig:
        raster = decode_raster((Path(args.features) / f"{cam.name}.odpt").read_bytes())
        features[cam.name] = lift_mod.FeatureImage(cam.name, raster.data)
    hits = lift_mod.build_hit_set(mask, rig)
    grid = lift_mod.color_voxels(hits, features)
    Path(args.out).write_bytes(encode_voxel_grid(grid))
    print(f"colored {int((~hits.unhit).sum())}/{len(hits)} candidate voxels", file=sys.stderr)
    return 0


def _cmd_align(args) -> int:
    hist = _load_grid(args.hist)
    t_hist = pose_from_json(Path(args.pose_hist).read_bytes())
    t_curr = pose_from_json(Path(args.pose_curr).read_bytes())
    aligned = lift_mod.align_history(hist, t_hist, t_curr)
    Path(args.out).write_bytes(encode_voxel_grid(aligned))
    return 0


def _cmd_fuse(args) -> int:
    curr = _load_grid(args.curr)
    aligned = [_load_grid(p) for p in args.aligned]
    fused = lift_mod.fuse_temporal(curr, aligned)
    Path(args.out).write_bytes(encode_voxel_grid(fused))
    return 0


def _cmd_eval(args) -> int:
    pred = _load_grid(args.pred)
    gt = _load_grid(args.gt)
    na, ne = (int(v) for v in args.rays.split("x"))
    elev = _parse_angle_range(args.elev)
    origin = tuple(float(v) for v in args.origin.split(","))
    rays = generate_rays(na, ne, elev, origin)
    thresholds = tuple(float(v) for v in args.thresholds.split(","))
    bands = None
    if args.bands:
        bands = [tuple(float(v) for v in b.split(":")) for b in args.bands.split(",")]
    report = ray_iou(pred, gt, rays, thresholds, bands=bands)
    doc = report.to_dict()
    doc["config"].update({"rays": args.rays, "elev": args.elev, "origin": args.origin,
                          "seed": args.seed, "threads": args.threads})
    _write_report(doc, args.report)
    print(f"RayIoU {report.ray_iou:.4f}", file=sys.stderr)
    return 0


def _cmd_loss(args) -> int:
    pred = ProbGrid.from_voxel_grid(_load_grid(args.pred))
    gt = _load_grid(args.gt)
    if gt.spec != pred.spec:
        raise ShapeError("pred and gt grids must share a spec")
    c = pred.num_classes
    if args.weights == "auto":
        w = class_weights(class_frequencies(gt, c))
    else:
        w_doc = json.loads(Path(args.weights).read_text())
        w = class_weights(np.asarray(w_doc["frequencies"], dtype=np.float64),
                          float(w_doc.get("constant", 1.02)))
    terms = args.terms.split(",")
    doc: dict = {"terms": {}, "seed": args.seed, "threads": args.threads}
    pred_labels = VoxelGrid(gt.spec, "label", np.argmax(pred.probs, axis=3).astype(np.uint8))
    for term in terms:
        if term == "ce":
            doc["terms"]["ce"] = weighted_ce(pred, gt, w)
        elif term == "dice":
            doc["terms"]["dice"] = dice_macro(pred_labels, gt, c)
        elif term == "scal":
            doc["terms"]["scal"] = scal_loss(pred, gt)
        else:
            raise DomainError(f"unknown loss term {term!r}")
    doc["sum"] = float(sum(doc["terms"].values()))
    _write_report(doc, args.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cylocc", description=__doc__)
    p.add_argument("--threads", type=int, default=0, help="worker cap, recorded in reports")
    p.add_argument("--seed", type=int, default=0, help="recorded in reports; no command draws randomness")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("info", help="summarize a binary file")
    s.add_argument("path")
    s.set_defaults(func=_cmd_info)

    s = sub.add_parser("synth", help="render a scene: rasters, cloud, ground-truth grids")
    s.add_argument("--scene", required=True)
    s.add_argument("--rig", default=None)
    s.add_argument("--erp", default="2000x1000")
    s.add_argument("--spec", default="default")
    s.add_argument("--supersample", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("voxelize", help="majority-vote voxelization of a point cloud")
    s.add_argument("--cloud", required=True)
    s.add_argument("--spec", default="default")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_voxelize)

    s = sub.add_parser("sketch", help="candidate mask from an ERP depth raster")
    s.add_argument("--depth", required=True)
    s.add_argument("--rig", default=None, help="reserved for per-camera depth input")
    s.add_argument("--spec", default="default")
    s.add_argument("--min-points", type=int, default=1, dest="min_points")
    s.add_argument("--schedule", default="8.5:0,17:1,25.6:2")
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_sketch)

    s = sub.add_parser("lift", help="color candidate voxels from camera features")
    s.add_argument("--mask", required=True)
    s.add_argument("--rig", required=True)
    s.add_argument("--features", required=True, help="directory of <camera>.odpt rasters")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_lift)

    s = sub.add_parser("align", help="warp a historical feature grid to the current frame")
    s.add_argument("--hist", required=True)
    s.add_argument("--pose-hist", required=True, dest="pose_hist")
    s.add_argument("--pose-curr", required=True, dest="pose_curr")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_align)

    s = sub.add_parser("fuse", help="average current and aligned feature grids")
    s.add_argument("--curr", required=True)
    s.add_argument("--aligned", nargs="*", default=[])
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_fuse)

    s = sub.add_parser("eval", help="RayIoU of prediction vs ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--rays", default="512x32")
    s.add_argument("--elev", default="-20:8.6deg")
    s.add_argument("--origin", default="0,0,0")
    s.add_argument("--thresholds", default="1,2,4")
    s.add_argument("--bands", default=None)
    s.add_argument("--report", default=None)
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("loss", help="loss terms of a probability grid against labels")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--weights", default="auto")
    s.add_argument("--terms", default="ce,dice,scal")
    s.add_argument("--report", default=None)
    s.set_defaults(func=_cmd_loss)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except (DomainError, ShapeError) as e:
        print(f"domain error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
