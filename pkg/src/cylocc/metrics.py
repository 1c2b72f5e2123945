"""Ray-based occupancy evaluation.

Query rays are cast into label grids to find the first non-free voxel along
each ray. The parametric caster is exact: it collects every parameter value
where the ray crosses a lattice surface (r cylinders, azimuth planes and z
planes for cylindrical grids; axis planes for cuboid grids), sorts them,
and classifies each interval by its midpoint, so cells are visited in true
geometric order and hits report the entry distance into the first occupied
cell. A deliberately naive fixed-step marcher is provided as an independent
oracle; it can only miss cells thinner than its step.

RayIoU scores a prediction against ground truth per class: a ray whose
ground-truth hit has class c counts as TP_c when the prediction hits class
c within a distance threshold, else FN_c plus an FP of the predicted class;
prediction hits on rays without a ground-truth hit are FPs. Per-class IoU
is TP / (TP + FP + FN), averaged over classes that occur, then over
thresholds. Rays hitting nothing in either grid are ignored, and the free
class is never scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .grid import CYLINDRICAL, GridSpec, LabelSet, VoxelGrid, default_label_set

_CHUNK = 2048  # rays per casting chunk; caps peak memory
_MIN_SEGMENT = 1e-12  # intervals shorter than this are degenerate


@dataclass(frozen=True)
class QueryRay:
    """Single evaluation ray: ego-frame origin and unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        if o.shape != (3,) or d.shape != (3,):
            raise ShapeError("ray origin and direction must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise DomainError("ray direction must be unit length within 1e-9")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


class Rays:
    """Batch of rays behaving as a sequence of QueryRay."""

    def __init__(self, origins, directions):
        o = np.asarray(origins, dtype=np.float64)
        d = np.asarray(directions, dtype=np.float64)
        if o.ndim != 2 or o.shape[1] != 3 or d.shape != o.shape:
            raise ShapeError("origins and directions must both be (N, 3)")
        norms = np.linalg.norm(d, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise DomainError("all ray directions must be unit length within 1e-9")
        self.origins = o
        self.directions = d

    def __len__(self) -> int:
        return len(self.origins)

    def __getitem__(self, i: int) -> QueryRay:
        return QueryRay(self.origins[i], self.directions[i])

    @staticmethod
    def from_list(rays) -> "Rays":
        if isinstance(rays, Rays):
            return rays
        return Rays(
            np.stack([r.origin for r in rays]),
            np.stack([r.direction for r in rays]),
        )


def generate_rays(
    azimuth_count: int,
    elevation_count: int,
    elevation_range: tuple[float, float],
    origin=(0.0, 0.0, 0.0),
) -> Rays:
    """Deterministic fan: azimuth bin centers over [-pi, pi) crossed with
    elevation bin centers over the given range."""
    if azimuth_count < 1 or elevation_count < 1:
        raise DomainError("ray counts must be >= 1")
    lo, hi = elevation_range
    if not lo < hi:
        raise DomainError("elevation range must have lo < hi")
    az = -math.pi + (np.arange(azimuth_count) + 0.5) * (2.0 * math.pi / azimuth_count)
    el = lo + (np.arange(elevation_count) + 0.5) * ((hi - lo) / elevation_count)
    aa, ee = np.meshgrid(az, el, indexing="ij")
    ce = np.cos(ee)
    d = np.stack([ce * np.cos(aa), ce * np.sin(aa), np.sin(ee)], axis=-1).reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.broadcast_to(np.asarray(origin, dtype=np.float64), d.shape).copy()
    return Rays(o, d)


def default_ray_fan(origin=(0.0, 0.0, 0.0)) -> Rays:
    """512 x 32 lidar-like fan over elevations (-0.35, 0.15) rad."""
    return generate_rays(512, 32, (-0.35, 0.15), origin)


@dataclass(frozen=True)
class RayHit:
    """First-surface hit: entry distance into the voxel and its class id."""

    distance: float
    label: int


@dataclass
class BatchHits:
    """Vectorized cast results; misses carry inf distance, label 0, voxel -1."""

    distance: np.ndarray
    label: np.ndarray
    voxel: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return np.isfinite(self.distance)

    def __len__(self) -> int:
        return len(self.distance)


def _cylindrical_crossings(spec: GridSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Candidate crossing parameters with every r shell, azimuth plane and
    z plane of a cylindrical lattice; invalid entries are NaN."""
    (r_lo, r_hi), _, (z_lo, z_hi) = spec.ranges
    d0, d1, d2 = spec.dims
    cols = []

    zk = z_lo + np.arange(d2 + 1) * ((z_hi - z_lo) / d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        cols.append((zk[None, :] - o[:, 2:3]) / d[:, 2:3])

    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
    c0 = o[:, 0] ** 2 + o[:, 1] ** 2
    rk = r_lo + np.arange(d0 + 1) * ((r_hi - r_lo) / d0)
    disc = b[:, None] ** 2 - 4.0 * a[:, None] * (c0[:, None] - rk[None, :] ** 2)
    # tangent guard: near-zero discriminants are treated as no crossing
    ok = (disc >= 1e-12) & (a[:, None] > 1e-30)
    sq = np.sqrt(np.where(ok, disc, np.nan))
    with np.errstate(divide="ignore", invalid="ignore"):
        inv2a = 0.5 / a[:, None]
    cols.append((-b[:, None] - sq) * inv2a)
    cols.append((-b[:, None] + sq) * inv2a)

    alpha = -math.pi + np.arange(d1) * (2.0 * math.pi / d1)
    nx, ny = -np.sin(alpha), np.cos(alpha)
    den = d[:, 0:1] * nx[None, :] + d[:, 1:2] * ny[None, :]
    num = -(o[:, 0:1] * nx[None, :] + o[:, 1:2] * ny[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        cols.append(num / den)

    return np.concatenate(cols, axis=1)


def _cuboid_crossings(spec: GridSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    cols = []
    for k in range(3):
        lo, hi = spec.ranges[k]
        edges = lo + np.arange(spec.dims[k] + 1) * ((hi - lo) / spec.dims[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            cols.append((edges[None, :] - o[:, k : k + 1]) / d[:, k : k + 1])
    return np.concatenate(cols, axis=1)


def _ray_intervals(spec: GridSpec, o: np.ndarray, d: np.ndarray, max_dist: float):
    """Sorted crossing parameters and midpoint cell classification.

    Returns (ts, idx, inside, seg_len): ts has one more column than the
    interval arrays; idx/inside/seg_len describe the interval between
    consecutive ts entries.
    """
    n = len(o)
    if spec.coord_sys == CYLINDRICAL:
        raw = _cylindrical_crossings(spec, o, d)
    else:
        raw = _cuboid_crossings(spec, o, d)
    t = np.where(np.isfinite(raw) & (raw > 0.0) & (raw < max_dist), raw, max_dist)
    ts = np.concatenate([np.zeros((n, 1)), t, np.full((n, 1), max_dist)], axis=1)
    ts.sort(axis=1)
    seg_len = np.diff(ts, axis=1)
    mids = 0.5 * (ts[:, :-1] + ts[:, 1:])
    pos = o[:, None, :] + mids[..., None] * d[:, None, :]
    idx = spec.point_to_index(pos.reshape(-1, 3)).reshape(n, -1, 3)
    inside = idx[..., 0] >= 0
    return ts, idx, inside, seg_len


def traverse_cells(ray: QueryRay, spec: GridSpec, max_dist: float):
    """Ordered in-range cells the ray passes through.

    Returns (cells, entries, exits): an (M, 3) index array of consecutive
    distinct cells plus the parameter at which each is entered and left.
    Degenerate slivers (shorter than 1e-12) are dropped.
    """
    ts, idx, inside, seg_len = _ray_intervals(
        spec, ray.origin[None], ray.direction[None], max_dist
    )
    keep = inside[0] & (seg_len[0] > _MIN_SEGMENT)
    cells, entries, exits = [], [], []
    for k in np.nonzero(keep)[0]:
        cell = tuple(int(v) for v in idx[0, k])
        # contiguous intervals classifying into the same cell merge; a gap
        # (the ray left the grid and came back) keeps a genuine revisit
        if cells and cells[-1] == cell and ts[0, k] - exits[-1] < 1e-9:
            exits[-1] = float(ts[0, k + 1])
        else:
            cells.append(cell)
            entries.append(float(ts[0, k]))
            exits.append(float(ts[0, k + 1]))
    return np.array(cells, dtype=np.int64).reshape(-1, 3), np.array(entries), np.array(exits)


def _first_hit_chunk(grid: VoxelGrid, o: np.ndarray, d: np.ndarray, max_dist: float) -> BatchHits:
    spec = grid.spec
    n = len(o)
    ts, idx, inside, seg_len = _ray_intervals(spec, o, d, max_dist)
    lab = np.zeros(inside.shape, dtype=np.int64)
    ii = idx[inside]
    if len(ii):
        lab[inside] = grid.data[ii[:, 0], ii[:, 1], ii[:, 2]]
    occupied = (lab != 0) & (seg_len > _MIN_SEGMENT)
    rows = np.arange(n)
    first = occupied.argmax(axis=1)
    any_hit = occupied.any(axis=1)
    dist = np.where(any_hit, ts[rows, first], np.inf)
    label = np.where(any_hit, lab[rows, first], 0)
    voxel = np.where(any_hit[:, None], idx[rows, first], -1)
    # a ray starting inside an occupied cell (per the point convention, which
    # also settles origins sitting exactly on a lattice plane) hits at t = 0
    idx0 = spec.point_to_index(o)
    in0 = idx0[:, 0] >= 0
    lab0 = np.zeros(n, dtype=np.int64)
    lab0[in0] = grid.data[idx0[in0, 0], idx0[in0, 1], idx0[in0, 2]]
    start_hit = lab0 != 0
    dist = np.where(start_hit, 0.0, dist)
    label = np.where(start_hit, lab0, label)
    voxel = np.where(start_hit[:, None], idx0, voxel)
    return BatchHits(dist, label, voxel)


def cast_rays(rays, grid: VoxelGrid, max_dist: float) -> BatchHits:
    """Exact first-hit cast of a ray batch into a label grid."""
    if grid.kind != "label":
        raise DomainError("ray casting needs a label grid")
    if max_dist <= 0:
        raise DomainError("max_dist must be positive")
    r = Rays.from_list(rays)
    parts = []
    for s in range(0, len(r), _CHUNK):
        parts.append(_first_hit_chunk(grid, r.origins[s : s + _CHUNK], r.directions[s : s + _CHUNK], max_dist))
    if not parts:
        return BatchHits(np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, 3), dtype=np.int64))
    return BatchHits(
        np.concatenate([p.distance for p in parts]),
        np.concatenate([p.label for p in parts]),
        np.concatenate([p.voxel for p in parts]),
    )


def cast_ray(ray: QueryRay, grid: VoxelGrid, max_dist: float) -> RayHit | None:
    """Single-ray convenience wrapper; returns None when nothing is hit."""
    hits = cast_rays(Rays(ray.origin[None], ray.direction[None]), grid, max_dist)
    if not hits.hit[0]:
        return None
    return RayHit(float(hits.distance[0]), int(hits.label[0]))


def march_fixed_step(rays, grid: VoxelGrid, max_dist: float, step: float = 0.01) -> BatchHits:
    """Brute-force oracle: sample the ray every `step` meters and report the
    first sample landing in a non-free voxel. Skips cells whose chord along
    the ray is shorter than the step; distances are quantized to the step."""
    if grid.kind != "label":
        raise DomainError("ray casting needs a label grid")
    r = Rays.from_list(rays)
    spec = grid.spec
    t = np.arange(int(math.floor(max_dist / step)) + 1, dtype=np.float64) * step
    dist = np.full(len(r), np.inf)
    label = np.zeros(len(r), dtype=np.int64)
    voxel = np.full((len(r), 3), -1, dtype=np.int64)
    chunk = max(1, int(2_000_000 // max(len(t), 1)))
    for s in range(0, len(r), chunk):
        o = r.origins[s : s + chunk]
        d = r.directions[s : s + chunk]
        pos = o[:, None, :] + t[None, :, None] * d[:, None, :]
        idx = spec.point_to_index(pos.reshape(-1, 3)).reshape(len(o), len(t), 3)
        inside = idx[..., 0] >= 0
        lab = np.zeros(inside.shape, dtype=np.int64)
        ii = idx[inside]
        if len(ii):
            lab[inside] = grid.data[ii[:, 0], ii[:, 1], ii[:, 2]]
        occupied = lab != 0
        any_hit = occupied.any(axis=1)
        first = occupied.argmax(axis=1)
        rows = np.arange(len(o))
        dist[s : s + chunk] = np.where(any_hit, t[first], np.inf)
        label[s : s + chunk] = np.where(any_hit, lab[rows, first], 0)
        voxel[s : s + chunk] = np.where(any_hit[:, None], idx[rows, first], -1)
    return BatchHits(dist, label, voxel)


def grid_max_distance(spec: GridSpec, origins=None) -> float:
    """Ray length guaranteed to leave the grid from any of the origins."""
    if spec.coord_sys == CYLINDRICAL:
        r_hi = spec.ranges[0][1]
        z_lo, z_hi = spec.ranges[2]
        diag = math.hypot(2.0 * r_hi, z_hi - z_lo)
    else:
        diag = math.sqrt(sum((hi - lo) ** 2 for lo, hi in spec.ranges))
    extra = 0.0
    if origins is not None:
        o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        extra = float(np.max(np.linalg.norm(o, axis=1), initial=0.0))
    return diag + extra + 1.0


@dataclass
class ThresholdCounts:
    """Per-class confusion counts at one distance threshold."""

    threshold: float
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    def per_class_iou(self) -> np.ndarray:
        denom = self.tp + self.fp + self.fn
        with np.errstate(invalid="ignore", divide="ignore"):
            iou = np.where(denom > 0, self.tp / np.maximum(denom, 1), np.nan)
        return iou

    def mean_iou(self) -> float:
        iou = self.per_class_iou()[1:]  # free class is never scored
        valid = ~np.isnan(iou)
        return float(np.mean(iou[valid])) if np.any(valid) else float("nan")


@dataclass
class RayIoUReport:
    """Confusion counts, per-class IoU and mean RayIoU, optionally per band."""

    class_names: tuple[str, ...]
    thresholds: tuple[float, ...]
    counts: list[ThresholdCounts]
    ray_iou: float
    per_threshold: np.ndarray
    bands: dict[tuple[float, float], "RayIoUReport"] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "classes": list(self.class_names),
            "thresholds": list(self.thresholds),
            "ray_iou": self.ray_iou,
            "per_threshold": [
                {
                    "threshold": c.threshold,
                    "mean_iou": c.mean_iou(),
                    "tp": c.tp.tolist(),
                    "fp": c.fp.tolist(),
                    "fn": c.fn.tolist(),
                    "per_class_iou": [None if np.isnan(v) else float(v) for v in c.per_class_iou()],
                }
                for c in self.counts
            ],
            "config": self.config,
        }
        if self.bands:
            out["bands"] = {
                f"{lo}:{hi}": rep.to_dict() for (lo, hi), rep in self.bands.items()
            }
        return out


def _confusion(gt_hits: BatchHits, pred_hits: BatchHits, tau: float, num_classes: int,
               ray_mask: np.ndarray) -> ThresholdCounts:
    gt_hit = gt_hits.hit & ray_mask
    pred_hit = pred_hits.hit & ray_mask
    with np.errstate(invalid="ignore"):
        close = np.abs(pred_hits.distance - gt_hits.distance) <= tau
    tp_ray = gt_hit & pred_hit & (gt_hits.label == pred_hits.label) & close
    tp = np.bincount(gt_hits.label[tp_ray], minlength=num_classes)
    fn = np.bincount(gt_hits.label[gt_hit & ~tp_ray], minlength=num_classes)
    fp = np.bincount(pred_hits.label[pred_hit & ~tp_ray], minlength=num_classes)
    return ThresholdCounts(tau, tp[:num_classes], fp[:num_classes], fn[:num_classes])


def _report_from_hits(gt_hits, pred_hits, thresholds, names, ray_mask, config) -> RayIoUReport:
    c = len(names)
    counts = [_confusion(gt_hits, pred_hits, tau, c, ray_mask) for tau in thresholds]
    per = np.array([tc.mean_iou() for tc in counts])
    mean = float(np.mean(per)) if len(per) and not np.all(np.isnan(per)) else float("nan")
    return RayIoUReport(tuple(names), tuple(thresholds), counts, mean, per, {}, config)


def ray_iou(
    pred: VoxelGrid,
    gt: VoxelGrid,
    rays,
    thresholds=(1.0, 2.0, 4.0),
    bands=None,
    labels: LabelSet | None = None,
    max_dist: float | None = None,
) -> RayIoUReport:
    """Score pred against gt over the given rays.

    bands, when given, are (lo, hi) meter pairs; each band sub-report
    restricts accounting to rays whose ground-truth hit distance d satisfies
    lo <= d < hi. Rays without a ground-truth hit belong to no band.
    """
    if pred.spec != gt.spec:
        raise ShapeError("pred and gt grids must share a spec")
    if pred.kind != "label" or gt.kind != "label":
        raise DomainError("RayIoU needs label grids")
    lab = labels if labels is not None else default_label_set()
    r = Rays.from_list(rays)
    if max_dist is None:
        max_dist = grid_max_distance(pred.spec, r.origins)
    gt_hits = cast_rays(r, gt, max_dist)
    pred_hits = cast_rays(r, pred, max_dist)
    all_rays = np.ones(len(r), dtype=bool)
    config = {
        "thresholds": list(thresholds),
        "num_rays": len(r),
        "max_dist": max_dist,
        "bands": [list(b) for b in bands] if bands else None,
    }
    report = _report_from_hits(gt_hits, pred_hits, thresholds, lab.names, all_rays, config)
    if bands:
        for lo, hi in bands:
            mask = gt_hits.hit & (gt_hits.distance >= lo) & (gt_hits.distance < hi)
            report.bands[(float(lo), float(hi))] = _report_from_hits(
                gt_hits, pred_hits, thresholds, lab.names, mask, {"band": [lo, hi]}
            )
    return report
