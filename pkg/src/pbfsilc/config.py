"""Run configuration: key=value files with defaults and validation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .geometry import PartGeometry, half_ellipsoid_part, load_mask_part, prism_part, rectangle_part
from .grid import MeshSpec, VoxelGridSpec
from .lifted import BACKWARD, FORWARD, MAX_TEMP, MELTPOOL_AREA, SURFACE_SUM, Measurement
from .silc import RasterParams, SilcConfig
from .thermal import MaterialParams

GEOMETRIES = ("rect", "prism", "half_ellipsoid", "mask")
MEASURES = (SURFACE_SUM, MAX_TEMP, MELTPOOL_AREA)


@dataclass
class RunConfig:
    """Resolved configuration for one build or analysis run."""

    # mesh; n1/n2 = 0 means size from the part with one element of margin
    n1: int = 0
    n2: int = 0
    window: int = 3
    dx: float = 2e-4
    dy: float = 2e-4
    dz: float = 2e-4
    dt: float = 5e-4
    # material (solid steel)
    conductivity: float = 33.5
    diffusivity: float = 6e-6
    # part
    geometry: str = "rect"
    length: float = 4e-3
    width: float = 2.4e-3
    height: float = 4e-3
    build_layers: int = 20
    mask_file: str = ""
    # path
    hatch: float = 4e-4
    speed: float = 0.8
    rotation_deg: float = 0.0
    start_angle_deg: float = 90.0
    # voxels
    voxel_size: int = 3
    # measurement
    measure: str = MAX_TEMP
    threshold: float = 1400.0
    measure_scale: float = 1.0
    # controller
    gamma: float = 0.2
    reference: float = 40.0
    power_nominal: float = 250.0
    power_min: float = 0.0
    power_max: float = 400.0
    start_layer: int = 10
    lookup: str = FORWARD
    # io
    output_dir: str = "out"
    pulse_samples: int = 8
    camera_dt: float = 5e-4

    def mesh_spec(self) -> MeshSpec:
        n1, n2 = self.n1, self.n2
        if n1 == 0:
            n1 = int(np.ceil(self.length / self.dx)) + 2
        if n2 == 0:
            n2 = int(np.ceil(self.width / self.dy)) + 2
        return MeshSpec(n1=n1, n2=n2, window=self.window, dx=self.dx, dy=self.dy, dz=self.dz, dt=self.dt)

    def material(self) -> MaterialParams:
        return MaterialParams(conductivity=self.conductivity, diffusivity=self.diffusivity)

    def part(self, spec: MeshSpec) -> PartGeometry:
        if self.geometry == "rect":
            return rectangle_part(spec, self.length, self.width, self.build_layers)
        if self.geometry == "prism":
            return prism_part(spec, self.length, self.width, self.build_layers)
        if self.geometry == "half_ellipsoid":
            return half_ellipsoid_part(spec, self.length, self.width, self.height)
        return load_mask_part(self.mask_file)

    def voxel_grid(self, geom: PartGeometry) -> VoxelGridSpec:
        d1a, d1b, d2a, d2b = geom.bounding_box()
        return VoxelGridSpec.cover(d1a, d1b, d2a, d2b, self.voxel_size)

    def measurement(self) -> Measurement:
        th = self.threshold if self.measure == MELTPOOL_AREA else None
        return Measurement(kind=self.measure, threshold=th, scale=self.measure_scale)

    def raster(self) -> RasterParams:
        return RasterParams(
            hatch=self.hatch,
            speed=self.speed,
            rotation_deg=self.rotation_deg,
            base_angle_deg=self.start_angle_deg,
        )

    def silc(self) -> SilcConfig:
        return SilcConfig(
            gamma=self.gamma,
            reference=self.reference,
            power_nominal=self.power_nominal,
            power_min=self.power_min,
            power_max=self.power_max,
            start_layer=self.start_layer,
        )

    def as_lines(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                out.append(f"{f.name}={v:.17g}")
            else:
                out.append(f"{f.name}={v}")
        return "\n".join(out) + "\n"


_INT_KEYS = {"n1", "n2", "window", "build_layers", "voxel_size", "start_layer", "pulse_samples"}
_STR_KEYS = {"geometry", "mask_file", "measure", "lookup", "output_dir"}
_POSITIVE = {
    "dx", "dy", "dz", "dt", "conductivity", "diffusivity", "length", "width",
    "height", "hatch", "speed", "gamma", "camera_dt",
}


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines; '#' starts a comment.  Unknown keys, repeated
    keys, bad literals and unit violations raise ConfigError with the line."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {ln}: key {key!r} repeated")
        try:
            if key in _INT_KEYS:
                parsed = int(val)
            elif key in _STR_KEYS:
                parsed = val
            else:
                parsed = float(val)
        except ValueError:
            raise ConfigError(f"line {ln}: cannot parse value {val!r} for {key}") from None
        if key in _POSITIVE and parsed <= 0:
            raise ConfigError(f"line {ln}: {key} must be strictly positive")
        values[key] = parsed

    cfg = RunConfig(**values)
    if cfg.geometry not in GEOMETRIES:
        raise ConfigError(f"geometry must be one of {GEOMETRIES}, got {cfg.geometry!r}")
    if cfg.geometry == "mask" and not cfg.mask_file:
        raise ConfigError("geometry=mask needs mask_file=<path>")
    if cfg.measure not in MEASURES:
        raise ConfigError(f"measure must be one of {MEASURES}, got {cfg.measure!r}")
    if cfg.lookup not in (FORWARD, BACKWARD):
        raise ConfigError(f"lookup must be forward or backward, got {cfg.lookup!r}")
    if cfg.window < 1 or cfg.build_layers < 1 or cfg.voxel_size < 1:
        raise ConfigError("window, build_layers and voxel_size must be >= 1")
    if cfg.n1 < 0 or cfg.n2 < 0:
        raise ConfigError("n1 and n2 must be >= 0 (0 = auto)")
    try:
        cfg.silc()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
