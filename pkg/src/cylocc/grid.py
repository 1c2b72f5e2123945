"""Cylindrical and cuboid voxel lattices.

A GridSpec fixes the lattice: bin counts per axis and per-axis ranges,
uniformly binned. Cylindrical axes are (r, theta, z) with theta spanning
exactly [-pi, pi) and wrapping; cuboid axes are (x, y, z). VoxelGrid pairs
a spec with a payload array in flat index order
i = (i0 * D1 + i1) * D2 + i2 (C order).

Bin assignment uses floor((v - min) / delta + 1e-9). The 1e-9 guard (in bin
units, i.e. sub-nanometer positions) snaps values sitting a rounding error
below an exactly-representable bin edge into the upper bin, which is where
exact real arithmetic puts them; e.g. z = 0 under the default spec belongs
to bin 7 although (0 + 2.8) / 0.4 evaluates to 6.99999999999999 in floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .geom import LabeledPointCloud

CYLINDRICAL = "cylindrical"
CUBOID = "cuboid"

# Index returned for points outside the grid range.
OUTSIDE = (-1, -1, -1)

_EDGE_GUARD = 1e-9  # bin-relative tolerance at bin edges


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry: coordinate system, bin counts, per-axis ranges."""

    coord_sys: str
    dims: tuple[int, int, int]
    ranges: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        if self.coord_sys not in (CYLINDRICAL, CUBOID):
            raise DomainError(f"unknown coordinate system {self.coord_sys!r}")
        dims = tuple(int(d) for d in self.dims)
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        if len(dims) != 3 or len(ranges) != 3:
            raise ShapeError("dims and ranges must each have three entries")
        if any(d < 1 for d in dims):
            raise DomainError("all bin counts must be >= 1")
        for lo, hi in ranges:
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise DomainError("each axis range must be finite with max > min")
        if self.coord_sys == CYLINDRICAL:
            lo, hi = ranges[1]
            if abs(lo + math.pi) > 1e-6 or abs(hi - math.pi) > 1e-6:
                raise DomainError("cylindrical theta range must be [-pi, pi)")
            if ranges[0][0] < 0:
                raise DomainError("cylindrical r range must be non-negative")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "ranges", ranges)

    @property
    def deltas(self) -> tuple[float, float, float]:
        return tuple((hi - lo) / d for (lo, hi), d in zip(self.ranges, self.dims))

    @property
    def num_voxels(self) -> int:
        d0, d1, d2 = self.dims
        return d0 * d1 * d2

    def point_to_index(self, p) -> np.ndarray:
        """Bin indices of Cartesian point(s); OUTSIDE rows for out-of-range.

        Accepts (3,) or (N, 3); returns an int array of matching shape. For
        cylindrical grids theta wraps (theta = pi maps to bin 0) while r and
        z go OUTSIDE beyond their ranges; the r = 0 axis uses atan2(0, 0) = 0.
        """
        pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
        single = np.asarray(p).ndim == 1
        if pts.shape[1] != 3:
            raise ShapeError("points must have three coordinates")
        native = self._to_native(pts)
        idx = np.empty((len(pts), 3), dtype=np.int64)
        inside = np.ones(len(pts), dtype=bool)
        for k in range(3):
            lo, hi = self.ranges[k]
            d = self.dims[k]
            delta = (hi - lo) / d
            q = np.floor((native[:, k] - lo) / delta + _EDGE_GUARD).astype(np.int64)
            if self.coord_sys == CYLINDRICAL and k == 1:
                idx[:, k] = np.mod(q, d)
            else:
                inside &= (native[:, k] >= lo) & (native[:, k] <= hi)
                idx[:, k] = np.clip(q, 0, d - 1)
        idx[~inside] = OUTSIDE
        return idx[0] if single else idx

    def index_to_center(self, i) -> np.ndarray:
        """Cartesian position of voxel center(s) for index triple(s)."""
        idx = np.atleast_2d(np.asarray(i, dtype=np.int64))
        single = np.asarray(i).ndim == 1
        if idx.shape[1] != 3:
            raise ShapeError("indices must have three components")
        for k in range(3):
            if np.any(idx[:, k] < 0) or np.any(idx[:, k] >= self.dims[k]):
                raise DomainError("voxel index outside grid dims")
        native = np.empty(idx.shape, dtype=np.float64)
        for k in range(3):
            lo, hi = self.ranges[k]
            delta = (hi - lo) / self.dims[k]
            native[:, k] = lo + (idx[:, k] + 0.5) * delta
        out = self._to_cartesian(native)
        return out[0] if single else out

    def all_centers(self) -> np.ndarray:
        """(D0*D1*D2, 3) Cartesian centers in flat index order."""
        d0, d1, d2 = self.dims
        i0, i1, i2 = np.meshgrid(np.arange(d0), np.arange(d1), np.arange(d2), indexing="ij")
        idx = np.stack([i0.ravel(), i1.ravel(), i2.ravel()], axis=1)
        return self.index_to_center(idx)

    def _to_native(self, pts: np.ndarray) -> np.ndarray:
        if self.coord_sys == CUBOID:
            return pts
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return np.stack([r, theta, pts[:, 2]], axis=1)

    def _to_cartesian(self, native: np.ndarray) -> np.ndarray:
        if self.coord_sys == CUBOID:
            return native.copy()
        r, theta, z = native[:, 0], native[:, 1], native[:, 2]
        return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def default_cylindrical_spec() -> GridSpec:
    """128 x 200 x 16 cylindrical lattice, r in (0, 25.6], z in (-2.8, 3.6]."""
    return GridSpec(
        CYLINDRICAL,
        (128, 200, 16),
        ((0.0, 25.6), (-math.pi, math.pi), (-2.8, 3.6)),
    )


def default_cuboid_spec() -> GridSpec:
    """64^3 cuboid lattice over the same footprint as the cylindrical default."""
    return GridSpec(
        CUBOID,
        (64, 64, 64),
        ((-25.6, 25.6), (-25.6, 25.6), (-2.8, 3.6)),
    )


PAYLOAD_KINDS = ("label", "occupancy", "feature")
_PAYLOAD_DTYPES = {"label": np.uint8, "occupancy": np.uint8, "feature": np.float32}


@dataclass
class VoxelGrid:
    """Voxel payload over a GridSpec.

    data is shaped (D0, D1, D2) for label/occupancy payloads and
    (D0, D1, D2, channels) for feature payloads; C order matches the flat
    index convention.
    """

    spec: GridSpec
    kind: str
    data: np.ndarray

    def __post_init__(self):
        if self.kind not in PAYLOAD_KINDS:
            raise DomainError(f"unknown payload kind {self.kind!r}")
        arr = np.asarray(self.data, dtype=_PAYLOAD_DTYPES[self.kind])
        want = self.spec.dims if self.kind != "feature" else None
        if self.kind == "feature":
            if arr.ndim != 4 or arr.shape[:3] != self.spec.dims:
                raise ShapeError(f"feature data must be {self.spec.dims} + (channels,), got {arr.shape}")
        else:
            if arr.shape != want:
                raise ShapeError(f"payload shape {arr.shape} does not match dims {want}")
        if self.kind == "occupancy" and arr.size and arr.max() > 1:
            raise DomainError("occupancy payload must be 0/1")
        self.data = arr

    @property
    def channels(self) -> int:
        return 1 if self.kind != "feature" else self.data.shape[3]

    def flat(self) -> np.ndarray:
        return self.data.reshape(self.spec.num_voxels, -1)

    @staticmethod
    def zeros(spec: GridSpec, kind: str, channels: int = 1) -> "VoxelGrid":
        if kind == "feature":
            return VoxelGrid(spec, kind, np.zeros(spec.dims + (channels,), dtype=np.float32))
        return VoxelGrid(spec, kind, np.zeros(spec.dims, dtype=np.uint8))


DEFAULT_CLASS_NAMES = (
    "free",
    "road",
    "sidewalk",
    "ground",
    "building",
    "wall",
    "vegetation",
    "vehicles",
    "other",
    "pole",
    "pedestrian",
    "roadline",
)


@dataclass(frozen=True)
class LabelSet:
    """Ordered semantic class names; index 0 is always the free class."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        if not names or names[0] != "free":
            raise DomainError("class 0 must be named 'free'")
        if len(set(names)) != len(names):
            raise DomainError("class names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def count(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"unknown class name {name!r}") from None


def default_label_set() -> LabelSet:
    return LabelSet(DEFAULT_CLASS_NAMES)


def voxelize_semantic(cloud: LabeledPointCloud, spec: GridSpec, labels: LabelSet) -> VoxelGrid:
    """Majority-vote semantic voxelization.

    Every in-range point votes for its class in its voxel; a voxel takes the
    most frequent class, breaking ties toward the smallest class id. Voxels
    without points stay free (0). Point order does not matter.
    """
    c = labels.count
    if len(cloud) and int(cloud.labels.max()) >= c:
        raise DomainError(f"point label >= class count {c}")
    grid = VoxelGrid.zeros(spec, "label")
    if not len(cloud):
        return grid
    idx = spec.point_to_index(cloud.points)
    inside = idx[:, 0] >= 0
    if not np.any(inside):
        return grid
    d0, d1, d2 = spec.dims
    flat = (idx[inside, 0] * d1 + idx[inside, 1]) * d2 + idx[inside, 2]
    votes = np.bincount(
        flat * c + cloud.labels[inside],
        minlength=spec.num_voxels * c,
    ).reshape(spec.num_voxels, c)
    # argmax takes the first maximum: smallest class id on ties, free (0)
    # for voxels with no points at all
    winner = np.argmax(votes, axis=1).astype(np.uint8)
    grid.data = winner.reshape(spec.dims)
    return grid


def class_frequencies(grid: VoxelGrid, num_classes: int | None = None) -> np.ndarray:
    """Fraction of voxels per class; sums to 1."""
    if grid.kind != "label":
        raise DomainError("class frequencies need a label grid")
    c = num_classes if num_classes is not None else int(grid.data.max()) + 1
    counts = np.bincount(grid.data.reshape(-1), minlength=c).astype(np.float64)
    return counts / grid.spec.num_voxels
