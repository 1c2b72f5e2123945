"""Lifting image features onto candidate voxels, and temporal fusion.

The coloring step projects every candidate voxel center into every rig
camera, keeps the in-view hits as normalized reference points, bilinearly
samples each camera's feature raster there, and averages the per-camera
samples. Cameras are accumulated in name order, so rig ordering can never
change the result. Voxels seen by no camera are flagged and stay zero.

Temporal alignment resamples a historical feature grid at the positions of
the current voxel centers expressed in the historical ego frame, with
trilinear interpolation in fractional index space (wrapping the azimuth
axis); samples outside the historical grid's r/z range contribute zeros.
Fusion averages the current grid with the aligned histories, dividing by
N + 1 with no renormalization for out-of-range zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .geom import FisheyeCamera, RigidTransform
from .grid import CYLINDRICAL, GridSpec, VoxelGrid
from .sketch import CandidateMask

_SNAP = 1e-9  # fractional index snap, keeps lattice-aligned warps exact


@dataclass
class FeatureImage:
    """Per-camera feature raster addressed by normalized [0, 1]^2 coordinates."""

    camera: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] < 1:
            raise ShapeError("feature data must be (H, W) or (H, W, channels)")
        if not np.all(np.isfinite(arr)):
            raise DomainError("feature raster contains non-finite values")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ReferencePoint:
    """A voxel's projection into one camera, in normalized pixel coordinates."""

    voxel: tuple[int, int, int]
    camera: str
    uv_norm: tuple[float, float]


class HitSet:
    """Per-candidate-voxel projection hits across the rig.

    voxels holds the occupied voxel indices (M, 3) in flat grid order;
    each camera contributes a validity mask (M,) and normalized coordinates
    (M, 2). Voxels with hit_count 0 are flagged via `unhit` and must not be
    averaged.
    """

    def __init__(self, spec: GridSpec, voxels: np.ndarray, cameras: list[str],
                 valid: dict[str, np.ndarray], uv: dict[str, np.ndarray]):
        self.spec = spec
        self.voxels = voxels
        self.cameras = tuple(cameras)
        self.valid = valid
        self.uv = uv

    @property
    def hit_counts(self) -> np.ndarray:
        if not self.cameras:
            return np.zeros(len(self.voxels), dtype=np.int64)
        return np.sum([self.valid[c] for c in self.cameras], axis=0)

    @property
    def unhit(self) -> np.ndarray:
        return self.hit_counts == 0

    def references(self, i: int) -> list[ReferencePoint]:
        """All reference points of the i-th candidate voxel."""
        out = []
        vox = tuple(int(v) for v in self.voxels[i])
        for cam in self.cameras:
            if self.valid[cam][i]:
                u, v = self.uv[cam][i]
                out.append(ReferencePoint(vox, cam, (float(u), float(v))))
        return out

    def __len__(self) -> int:
        return len(self.voxels)


def build_hit_set(mask: CandidateMask, rig: list[FisheyeCamera]) -> HitSet:
    """Project candidate voxel centers into every rig camera.

    A hit requires the projection to succeed (inside the field of view) and
    the pixel to land inside the camera raster, so recorded normalized
    coordinates are in bounds by construction.
    """
    if not rig:
        raise DomainError("rig must contain at least one camera")
    names = [cam.name for cam in rig]
    if len(set(names)) != len(names):
        raise DomainError("rig camera names must be unique")
    occ = np.argwhere(mask.occupied)
    centers = mask.spec.index_to_center(occ) if len(occ) else np.zeros((0, 3))
    valid: dict[str, np.ndarray] = {}
    uv: dict[str, np.ndarray] = {}
    for cam in rig:
        if len(occ):
            px, ok = cam.project(centers)
            ok = ok & (px[:, 0] >= 0) & (px[:, 0] < cam.width) & (px[:, 1] >= 0) & (px[:, 1] < cam.height)
            norm = np.zeros_like(px)
            norm[:, 0] = px[:, 0] / cam.width
            norm[:, 1] = px[:, 1] / cam.height
            norm[~ok] = 0.0
        else:
            ok = np.zeros(0, dtype=bool)
            norm = np.zeros((0, 2))
        valid[cam.name] = ok
        uv[cam.name] = norm
    return HitSet(mask.spec, occ, names, valid, uv)


def bilinear_sample(image: FeatureImage, uv_norm: np.ndarray) -> np.ndarray:
    """Sample a feature raster at normalized coordinates, (M, channels).

    Interpolation nodes sit at pixel centers; coordinates are clamped to the
    node range at the borders. The two-stage lerp form keeps constant rasters
    exactly constant.
    """
    f = image.data.astype(np.float64)
    h, w = image.height, image.width
    x = np.clip(uv_norm[:, 0] * w - 0.5, 0.0, w - 1.0)
    y = np.clip(uv_norm[:, 1] * h - 0.5, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), w - 2) if w > 1 else np.zeros(len(x), dtype=np.int64)
    y0 = np.minimum(np.floor(y).astype(np.int64), h - 2) if h > 1 else np.zeros(len(y), dtype=np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = (x - x0)[:, None]
    ty = (y - y0)[:, None]
    top = f[y0, x0] + tx * (f[y0, x1] - f[y0, x0])
    bot = f[y1, x0] + tx * (f[y1, x1] - f[y1, x0])
    return top + ty * (bot - top)


def color_voxels(hits: HitSet, features) -> VoxelGrid:
    """Average per-camera feature samples into a voxel feature grid.

    features may be a list of FeatureImage or a name -> FeatureImage dict
    covering every camera in the hit set. Voxels without hits get zeros.
    """
    if isinstance(features, dict):
        by_name = dict(features)
    else:
        by_name = {img.camera: img for img in features}
    missing = [c for c in hits.cameras if c not in by_name]
    if missing:
        raise DomainError(f"no feature image for cameras {missing}")
    channels = {by_name[c].channels for c in hits.cameras}
    if len(channels) != 1:
        raise ShapeError(f"feature channel counts differ across cameras: {sorted(channels)}")
    d = channels.pop()
    acc = np.zeros((len(hits), d), dtype=np.float64)
    # name order, not rig order: permutation invariance by construction
    for cam in sorted(hits.cameras):
        ok = hits.valid[cam]
        if not np.any(ok):
            continue
        acc[ok] += bilinear_sample(by_name[cam], hits.uv[cam][ok])
    counts = hits.hit_counts
    hit_rows = counts > 0
    acc[hit_rows] /= counts[hit_rows, None]
    acc[~hit_rows] = 0.0
    grid = VoxelGrid.zeros(hits.spec, "feature", d)
    if len(hits):
        v = hits.voxels
        grid.data[v[:, 0], v[:, 1], v[:, 2]] = acc.astype(np.float32)
    return grid


def _snap(frac: np.ndarray) -> np.ndarray:
    rounded = np.round(frac)
    return np.where(np.abs(frac - rounded) < _SNAP, rounded, frac)


def align_history(
    hist: VoxelGrid,
    t_hist: RigidTransform,
    t_curr: RigidTransform,
) -> VoxelGrid:
    """Resample a historical feature grid into the current ego frame.

    Each current voxel center p is read at p' = t_hist^-1 * t_curr * p in
    the historical grid, trilinearly in fractional index space. The azimuth
    axis wraps; nodes past the r/z ends pad with zeros; samples outside the
    r/z range yield the zero vector. Fractional coordinates within 1e-9 of
    a lattice node snap to it, so lattice-aligned warps are exact.
    """
    if hist.kind != "feature":
        raise DomainError("alignment needs a feature grid")
    spec = hist.spec
    d0, d1, d2 = spec.dims
    ch = hist.channels
    rel = t_hist.inverse().compose(t_curr)
    centers = spec.all_centers()
    native = spec._to_native(rel.apply(centers))

    fracs = []
    for k in range(3):
        lo, hi = spec.ranges[k]
        delta = (hi - lo) / spec.dims[k]
        fracs.append(_snap((native[:, k] - lo) / delta - 0.5))
    f0, f1, f2 = fracs

    wrap_theta = spec.coord_sys == CYLINDRICAL
    in_range = np.ones(len(centers), dtype=bool)
    for k, f in ((0, f0), (2, f2)):
        lo, hi = spec.ranges[k]
        in_range &= (native[:, k] >= lo) & (native[:, k] <= hi)
    if not wrap_theta:
        lo, hi = spec.ranges[1]
        in_range &= (native[:, 1] >= lo) & (native[:, 1] <= hi)

    base = [np.floor(f).astype(np.int64) for f in (f0, f1, f2)]
    t = [f - b for f, b in zip((f0, f1, f2), base)]
    data = hist.data.reshape(d0, d1, d2, ch).astype(np.float64)

    def node(o0, o1, o2):
        i0 = base[0] + o0
        i1 = base[1] + o1
        i2 = base[2] + o2
        if wrap_theta:
            i1 = np.mod(i1, d1)
            ok = (i0 >= 0) & (i0 < d0) & (i2 >= 0) & (i2 < d2)
        else:
            ok = (i0 >= 0) & (i0 < d0) & (i1 >= 0) & (i1 < d1) & (i2 >= 0) & (i2 < d2)
        out = np.zeros((len(i0), ch), dtype=np.float64)
        if np.any(ok):
            out[ok] = data[i0[ok], i1[ok], i2[ok]]
        return out

    t0 = t[0][:, None]
    t1 = t[1][:, None]
    t2 = t[2][:, None]
    # lerp along axis 2, then 1, then 0; constants stay exact
    c00 = node(0, 0, 0) + t2 * (node(0, 0, 1) - node(0, 0, 0))
    c01 = node(0, 1, 0) + t2 * (node(0, 1, 1) - node(0, 1, 0))
    c10 = node(1, 0, 0) + t2 * (node(1, 0, 1) - node(1, 0, 0))
    c11 = node(1, 1, 0) + t2 * (node(1, 1, 1) - node(1, 1, 0))
    c0 = c00 + t1 * (c01 - c00)
    c1 = c10 + t1 * (c11 - c10)
    out = c0 + t0 * (c1 - c0)
    out[~in_range] = 0.0
    return VoxelGrid(spec, "feature", out.reshape(d0, d1, d2, ch).astype(np.float32))


def fuse_temporal(curr: VoxelGrid, aligned: list[VoxelGrid]) -> VoxelGrid:
    """Average the current grid with N aligned histories: (curr + sum) / (N+1)."""
    if curr.kind != "feature":
        raise DomainError("fusion needs feature grids")
    for g in aligned:
        if g.spec != curr.spec or g.kind != "feature" or g.channels != curr.channels:
            raise ShapeError("all grids must share spec, kind and channel count")
    acc = curr.data.astype(np.float64)
    for g in aligned:
        acc = acc + g.data.astype(np.float64)
    acc /= len(aligned) + 1
    return VoxelGrid(curr.spec, "feature", acc.astype(np.float32))
