"""Part cross-sections on the mesh grid.

A part is a stack of boolean in-part masks, one per build layer, all defined
on the n1 x n2 mesh cross-section.  Element (d1, d2) has its center at
((d1 - 0.5) * dx, (d2 - 0.5) * dy).
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError
from .grid import MeshSpec


class PartGeometry:
    """Per-layer in-part masks over the mesh cross-section."""

    def __init__(self, masks):
        masks = [np.asarray(m, dtype=bool) for m in masks]
        if not masks:
            raise GeometryError("part needs at least one layer")
        shape = masks[0].shape
        for i, m in enumerate(masks):
            if m.shape != shape:
                raise GeometryError(f"layer {i + 1} mask shape {m.shape} != {shape}")
            if not m.any():
                raise GeometryError(f"layer {i + 1} mask is empty")
        self.masks = masks

    @property
    def n_layers(self) -> int:
        return len(self.masks)

    def layer_mask(self, layer: int) -> np.ndarray:
        """Boolean (n1, n2) mask of build layer `layer` (1-based)."""
        if not (1 <= layer <= self.n_layers):
            raise GeometryError(f"layer {layer} outside 1..{self.n_layers}")
        return self.masks[layer - 1]

    def bounding_box(self):
        """(d1_min, d1_max, d2_min, d2_max) of the union of all layers."""
        union = np.logical_or.reduce(self.masks)
        i1, i2 = np.nonzero(union)
        return int(i1.min()) + 1, int(i1.max()) + 1, int(i2.min()) + 1, int(i2.max()) + 1

    def contour_mask(self, layer: int) -> np.ndarray:
        """In-part elements with at least one out-of-part 4-neighbor."""
        m = self.layer_mask(layer)
        inner = np.zeros_like(m)
        inner[1:-1, 1:-1] = m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
        return m & ~inner


def _centers(spec: MeshSpec):
    x = (np.arange(1, spec.n1 + 1) - 0.5) * spec.dx
    y = (np.arange(1, spec.n2 + 1) - 0.5) * spec.dy
    return np.meshgrid(x, y, indexing="ij")


def rectangle_part(spec: MeshSpec, length: float, width: float, n_layers: int) -> PartGeometry:
    """Axis-aligned rectangle, centered on the mesh, constant over layers."""
    xx, yy = _centers(spec)
    cx, cy = spec.n1 * spec.dx / 2, spec.n2 * spec.dy / 2
    mask = (np.abs(xx - cx) <= length / 2) & (np.abs(yy - cy) <= width / 2)
    if not mask.any():
        raise GeometryError("rectangle does not cover any element center")
    return PartGeometry([mask] * n_layers)


def prism_part(spec: MeshSpec, length: float, width: float, n_layers: int) -> PartGeometry:
    """Triangular prism: isoceles cross-section pointing in +x, constant over layers.

    The base (width `width`) sits at the left end and the tip at x = length,
    so raster tracks perpendicular to x get shorter toward the right end.
    """
    xx, yy = _centers(spec)
    cy = spec.n2 * spec.dy / 2
    x0 = (spec.n1 * spec.dx - length) / 2
    rel = (xx - x0) / length
    half = (width / 2) * (1.0 - rel)
    mask = (rel >= 0) & (rel <= 1) & (np.abs(yy - cy) <= half)
    if not mask.any():
        raise GeometryError("prism does not cover any element center")
    return PartGeometry([mask] * n_layers)


def half_ellipsoid_part(spec: MeshSpec, length: float, width: float, height: float) -> PartGeometry:
    """Half ellipsoid (dome): elliptical cross-sections shrinking with height.

    Layer l spans heights ((l-1)*dz, l*dz); its mask is the ellipse at the
    layer mid-height.  Layers above the apex are dropped.
    """
    a, b = length / 2, width / 2
    xx, yy = _centers(spec)
    cx, cy = spec.n1 * spec.dx / 2, spec.n2 * spec.dy / 2
    masks = []
    layer = 1
    while True:
        z = (layer - 0.5) * spec.dz
        if z >= height:
            break
        s = np.sqrt(1.0 - (z / height) ** 2)
        mask = ((xx - cx) / (a * s)) ** 2 + ((yy - cy) / (b * s)) ** 2 <= 1.0
        if not mask.any():
            break
        masks.append(mask)
        layer += 1
    if not masks:
        raise GeometryError("ellipsoid produces no non-empty layer")
    return PartGeometry(masks)


def load_mask_part(path) -> PartGeometry:
    """Read per-layer masks from a text file.

    Layers are blocks of equal-length rows of '0'/'1' characters separated
    by blank lines; row k of a block is the y = k line, columns are x.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    blocks = [b for b in text.split("\n\n") if b.strip()]
    if not blocks:
        raise GeometryError(f"{path}: no mask blocks found")
    masks = []
    for bi, block in enumerate(blocks):
        rows = [ln.strip() for ln in block.splitlines() if ln.strip()]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise GeometryError(f"{path}: block {bi + 1} has ragged rows")
        grid = np.array([[c == "1" for c in row] for row in rows], dtype=bool)
        masks.append(grid.T)  # file rows are y, array axis 0 is x
    return PartGeometry(masks)
