"""Index arithmetic between the 3-D mesh, flat state vectors and the voxel grid.

The finite-difference mesh is N1 x N2 x W elements (W = number of layers kept
in the state window).  Flat state indices are 1-based and run fastest along
the first axis, then the second, then the layer slot, so slot W (the top,
currently printed layer) occupies the last N1*N2 entries of a state vector.
The control-voxel grid is a coarser 2-D grid over the same cross-section.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MeshSpec:
    """Uniform finite-difference mesh over the tracked layer window.

    n1, n2   elements along x and y
    window   number of layers kept in the state vector
    dx, dy   element sizes (m)
    dz       element height (m); equal to the layer thickness
    dt       time step (s)
    """

    n1: int
    n2: int
    window: int
    dx: float
    dy: float
    dz: float
    dt: float

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.window < 1:
            raise ValueError(
                f"element counts must be >= 1, got {self.n1}x{self.n2}x{self.window}"
            )
        for name in ("dx", "dy", "dz", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def plane(self) -> int:
        """Elements per layer."""
        return self.n1 * self.n2

    @property
    def size(self) -> int:
        """Total state dimension."""
        return self.n1 * self.n2 * self.window

    @property
    def top_offset(self) -> int:
        """0-based offset of the top layer block in a state vector."""
        return (self.window - 1) * self.plane


def flat_index(d1: int, d2: int, d3: int, spec: MeshSpec) -> int:
    """1-based flat index of mesh element (d1, d2, d3)."""
    if not (1 <= d1 <= spec.n1 and 1 <= d2 <= spec.n2 and 1 <= d3 <= spec.window):
        raise ValueError(f"element ({d1},{d2},{d3}) outside {spec.n1}x{spec.n2}x{spec.window} mesh")
    return d1 + (d2 - 1) * spec.n1 + (d3 - 1) * spec.n1 * spec.n2


def grid_coords(flat: int, spec: MeshSpec) -> tuple[int, int, int]:
    """Inverse of flat_index: (d1, d2, d3) of a 1-based flat index."""
    if not (1 <= flat <= spec.size):
        raise ValueError(f"flat index {flat} outside 1..{spec.size}")
    d3 = -(-flat // spec.plane)  # ceil division
    rem = flat - (d3 - 1) * spec.plane
    d2 = -(-rem // spec.n1)
    d1 = rem - (d2 - 1) * spec.n1
    return d1, d2, d3


def plane_index(d1: int, d2: int, spec: MeshSpec) -> int:
    """1-based flat index of (d1, d2) within a single layer."""
    if not (1 <= d1 <= spec.n1 and 1 <= d2 <= spec.n2):
        raise ValueError(f"element ({d1},{d2}) outside {spec.n1}x{spec.n2} cross-section")
    return d1 + (d2 - 1) * spec.n1


def vectorize(field: np.ndarray, spec: MeshSpec) -> np.ndarray:
    """Flatten an (n1, n2, window) array in flat_index order."""
    field = np.asarray(field)
    expect = (spec.n1, spec.n2, spec.window)
    if field.shape != expect:
        raise ValueError(f"field shape {field.shape} does not match mesh {expect}")
    # first axis fastest = column-major flattening
    return field.reshape(-1, order="F")


def devectorize(vec: np.ndarray, spec: MeshSpec) -> np.ndarray:
    """Inverse of vectorize."""
    vec = np.asarray(vec)
    if vec.shape != (spec.size,):
        raise ValueError(f"vector length {vec.shape} does not match state size {spec.size}")
    return vec.reshape((spec.n1, spec.n2, spec.window), order="F")


@dataclass(frozen=True)
class VoxelGridSpec:
    """Coarse control-voxel grid over the layer cross-section.

    Voxels are squares of `size` x `size` mesh elements, anchored so that
    voxel (1, 1) starts at mesh element (anchor1, anchor2).  Partial voxels
    at the far boundary are kept.  Voxels are numbered like mesh elements:
    id = v1 + (v2 - 1) * m1.
    """

    m1: int
    m2: int
    size: int
    anchor1: int = 1
    anchor2: int = 1

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1 or self.size < 1:
            raise ValueError("voxel grid needs m1, m2, size >= 1")

    @property
    def n_voxels(self) -> int:
        return self.m1 * self.m2

    @classmethod
    def cover(cls, d1_min: int, d1_max: int, d2_min: int, d2_max: int, size: int) -> "VoxelGridSpec":
        """Smallest grid of `size`-element voxels covering an element box."""
        if d1_max < d1_min or d2_max < d2_min:
            raise ValueError("empty element box")
        m1 = -(-(d1_max - d1_min + 1) // size)
        m2 = -(-(d2_max - d2_min + 1) // size)
        return cls(m1=m1, m2=m2, size=size, anchor1=d1_min, anchor2=d2_min)

    def voxel_of(self, d1: int, d2: int) -> tuple[int, int]:
        """Voxel (v1, v2) containing mesh element (d1, d2)."""
        v1 = (d1 - self.anchor1) // self.size + 1
        v2 = (d2 - self.anchor2) // self.size + 1
        if not (1 <= v1 <= self.m1 and 1 <= v2 <= self.m2):
            raise ValueError(f"element ({d1},{d2}) outside the voxel grid")
        return v1, v2

    def voxel_id(self, v1: int, v2: int) -> int:
        if not (1 <= v1 <= self.m1 and 1 <= v2 <= self.m2):
            raise ValueError(f"voxel ({v1},{v2}) outside {self.m1}x{self.m2} grid")
        return v1 + (v2 - 1) * self.m1

    def voxel_coords(self, vid: int) -> tuple[int, int]:
        if not (1 <= vid <= self.n_voxels):
            raise ValueError(f"voxel id {vid} outside 1..{self.n_voxels}")
        v2 = -(-vid // self.m1)
        v1 = vid - (v2 - 1) * self.m1
        return v1, v2


def element_to_voxel(d1: int, d2: int, vspec: VoxelGridSpec) -> int:
    """Voxel id containing mesh element (d1, d2)."""
    v1, v2 = vspec.voxel_of(d1, d2)
    return vspec.voxel_id(v1, v2)
