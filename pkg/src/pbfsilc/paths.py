"""Raster path generation, laser masks and sample-to-voxel registration.

A schedule holds the laser element occupancy at sample instants
n = 0..n_steps.  Power commands exist for n = 0..n_steps-1; the extra
terminal entry is where the camera sees the laser at the final sample and
only participates in spatial registration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GeometryError
from .geometry import PartGeometry
from .grid import MeshSpec, VoxelGridSpec, element_to_voxel


@dataclass
class PathSchedule:
    """Laser element occupancy for one layer.

    elements  (n_steps + 1, 2) int array of 1-based (d1, d2)
    on        boolean per entry; False rows are laser-off holds
    """

    layer: int
    elements: np.ndarray
    on: np.ndarray

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=int)
        self.on = np.asarray(self.on, dtype=bool)
        if self.elements.ndim != 2 or self.elements.shape[1] != 2:
            raise DimensionError("elements must be an (n, 2) array")
        if len(self.on) != len(self.elements):
            raise DimensionError("on flags and elements differ in length")
        if len(self.elements) < 2:
            raise DimensionError("a schedule needs at least one input step plus the terminal sample")

    @property
    def n_steps(self) -> int:
        """Number of power commands (the terminal entry is registration only)."""
        return len(self.elements) - 1

    def element(self, n: int) -> tuple[int, int]:
        """(d1, d2) occupied at sample n (0..n_steps)."""
        d1, d2 = self.elements[n]
        return int(d1), int(d2)


@dataclass
class SampleSets:
    """Partition of sample indices 0..n_steps over the touched voxels.

    voxel_ids  sorted global voxel ids with at least one sample
    samples    list of sorted int arrays, aligned with voxel_ids
    """

    voxel_ids: list[int]
    samples: list[np.ndarray]
    n_steps: int

    @property
    def n_voxels(self) -> int:
        return len(self.voxel_ids)

    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.samples])

    def observable(self) -> "SampleSets":
        """Copy without voxels that hold no sample in 1..n_steps.

        Such voxels (only possible holder: the path's first sample) never
        produce an output, so averaging over them is undefined.
        """
        ids, samps = [], []
        for vid, s in zip(self.voxel_ids, self.samples):
            if np.any((s >= 1) & (s <= self.n_steps)):
                ids.append(vid)
                samps.append(s)
        return SampleSets(voxel_ids=ids, samples=samps, n_steps=self.n_steps)


def _nearest_index(coord: float, h: float, n: int) -> int:
    # element centers sit at (i - 0.5) * h; exact midpoints round down
    i = math.ceil(coord / h - 1e-9)
    return min(max(i, 1), n)


def _snap(x: float, y: float, spec: MeshSpec, mask: np.ndarray, centers) -> tuple[int, int]:
    d1 = _nearest_index(x, spec.dx, spec.n1)
    d2 = _nearest_index(y, spec.dy, spec.n2)
    if mask[d1 - 1, d2 - 1]:
        return d1, d2
    # clipped corners can push a connector sample off the part: take the
    # nearest in-part element, ties toward the lower indices
    cx, cy, ids = centers
    dist = (cx - x) ** 2 + (cy - y) ** 2
    best = np.lexsort((ids[:, 1], ids[:, 0], dist))[0]
    return int(ids[best, 0]), int(ids[best, 1])


def generate_raster(
    geom: PartGeometry,
    layer: int,
    hatch: float,
    speed: float,
    dt: float,
    angle: float,
    spec: MeshSpec,
) -> PathSchedule:
    """Serpentine raster over the layer mask, sampled at the camera period.

    Scan lines run along `angle` (degrees from +x), are spaced by `hatch`
    (m) starting at the first in-part element center, and are traversed in
    alternating directions at constant `speed`.  Between lines the laser
    travels the straight connector with no dwell.  Samples land every
    speed*dt of arc length and snap to the nearest element center.
    """
    if hatch <= 0 or speed <= 0 or dt <= 0:
        raise ValueError("hatch, speed and dt must be strictly positive")
    if not (0.0 <= angle < 180.0):
        raise ValueError(f"angle {angle} outside [0, 180)")
    mask = geom.layer_mask(layer)
    if not mask.any():
        raise GeometryError(f"layer {layer} mask is empty")

    i1, i2 = np.nonzero(mask)
    cx = (i1 + 0.5) * spec.dx
    cy = (i2 + 0.5) * spec.dy
    ids = np.stack([i1 + 1, i2 + 1], axis=1)
    centers = (cx, cy, ids)

    theta = math.radians(angle)
    ex, ey = math.cos(theta), math.sin(theta)
    nx, ny = -math.sin(theta), math.cos(theta)
    s = cx * nx + cy * ny
    t = cx * ex + cy * ey

    band = max(hatch, math.hypot(spec.dx, spec.dy)) / 2
    s_min, s_max = float(s.min()), float(s.max())
    n_lines = int(math.floor((s_max - s_min) / hatch + 1e-9)) + 1

    vertices = []
    for k in range(n_lines):
        sk = s_min + k * hatch
        near = np.abs(s - sk) <= band
        if not near.any():
            continue
        t_lo, t_hi = float(t[near].min()), float(t[near].max())
        p_lo = (sk * nx + t_lo * ex, sk * ny + t_lo * ey)
        p_hi = (sk * nx + t_hi * ex, sk * ny + t_hi * ey)
        if len(vertices) % 2 == 0:
            vertices.append((p_lo, p_hi))
        else:
            vertices.append((p_hi, p_lo))

    # polyline through line ends with straight connectors
    points = []
    for start, end in vertices:
        points.append(start)
        points.append(end)
    seg_len = []
    for a, b in zip(points[:-1], points[1:]):
        seg_len.append(math.hypot(b[0] - a[0], b[1] - a[1]))
    total = float(sum(seg_len))
    stride = speed * dt

    n_steps = max(1, math.ceil(total / stride - 1e-9))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    elements = np.zeros((n_steps + 1, 2), dtype=int)
    for n in range(n_steps + 1):
        arc = min(n * stride, total)
        seg = min(int(np.searchsorted(cum, arc, side="right")) - 1, len(seg_len) - 1) if seg_len else 0
        if seg_len:
            a, b = points[seg], points[seg + 1]
            frac = (arc - cum[seg]) / seg_len[seg] if seg_len[seg] > 0 else 0.0
            x = a[0] + frac * (b[0] - a[0])
            y = a[1] + frac * (b[1] - a[1])
        else:
            x, y = points[0]
        elements[n] = _snap(x, y, spec, mask, centers)
    return PathSchedule(layer=layer, elements=elements, on=np.ones(n_steps + 1, dtype=bool))


def raster_angle(layer: int, step_deg: float, base_deg: float = 0.0) -> float:
    """Scan angle for a layer under a fixed per-layer rotation."""
    return (base_deg + layer * step_deg) % 180.0


def mask_sequence(sched: PathSchedule, spec: MeshSpec, spread=None) -> np.ndarray:
    """Power-distribution rows h(n) for n = 0..n_steps-1.

    Each row is a plane-sized vector; the default is a unit one-hot at the
    occupied element, a zero row for laser-off steps.  `spread` distributes
    the power along the travel direction as (offset, weight) pairs, e.g.
    [(-1, 1/8), (0, 3/4), (1, 1/8)]; weights falling outside the mesh are
    dropped.
    """
    n = sched.n_steps
    h = np.zeros((n, spec.plane))
    for i in range(n):
        if not sched.on[i]:
            continue
        d1, d2 = sched.element(i)
        if spread is None:
            h[i, (d1 - 1) + (d2 - 1) * spec.n1] = 1.0
            continue
        # travel direction from this sample to the next occupied one
        d1n, d2n = sched.element(i + 1)
        sx = int(np.sign(d1n - d1))
        sy = int(np.sign(d2n - d2))
        if sx == 0 and sy == 0:
            sx = 1
        for off, wgt in spread:
            e1, e2 = d1 + off * sx, d2 + off * sy
            if 1 <= e1 <= spec.n1 and 1 <= e2 <= spec.n2:
                h[i, (e1 - 1) + (e2 - 1) * spec.n1] += wgt
    return h


def register_samples(sched: PathSchedule, vspec: VoxelGridSpec) -> SampleSets:
    """Assign every on-sample index 0..n_steps to the voxel it lands in."""
    buckets: dict[int, list[int]] = {}
    for n in range(sched.n_steps + 1):
        if not sched.on[n]:
            continue
        d1, d2 = sched.element(n)
        vid = element_to_voxel(d1, d2, vspec)
        buckets.setdefault(vid, []).append(n)
    voxel_ids = sorted(buckets)
    samples = [np.array(buckets[v], dtype=int) for v in voxel_ids]
    return SampleSets(voxel_ids=voxel_ids, samples=samples, n_steps=sched.n_steps)


def write_path_csv(path, sched: PathSchedule) -> None:
    """Dump a schedule as `layer,n,d1,d2,on` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("layer,n,d1,d2,on\n")
        for n in range(sched.n_steps + 1):
            d1, d2 = sched.element(n)
            fh.write(f"{sched.layer},{n},{d1},{d2},{1 if sched.on[n] else 0}\n")


def read_path_csv(path) -> PathSchedule:
    """Inverse of write_path_csv (single-layer files)."""
    elements, flags, layers = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "layer,n,d1,d2,on":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            layer_s, _, d1_s, d2_s, on_s = line.strip().split(",")
            layers.append(int(layer_s))
            elements.append((int(d1_s), int(d2_s)))
            flags.append(on_s == "1")
    if len(set(layers)) != 1:
        raise ValueError(f"{path}: expected a single layer per file")
    return PathSchedule(layer=layers[0], elements=np.array(elements), on=np.array(flags))
