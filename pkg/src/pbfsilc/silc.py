"""Spatial iterative learning controller and the layer-by-layer driver.

The controller keeps a per-voxel power look-up table and updates it between
layers from the voxel output error: u(l+1) = u(l) + gamma * e(l), clamped
to the power limits.  Voxels are addressed by their global grid id so the
table survives changes of the layer cross-section.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .geometry import PartGeometry
from .grid import MeshSpec, VoxelGridSpec
from .lifted import FORWARD, Measurement, power_lookup_matrix, voxel_average_matrix
from .paths import generate_raster, mask_sequence, raster_angle, register_samples
from .thermal import MaterialParams, ThermalState, build_system, recoat_and_shift, simulate_layer


@dataclass(frozen=True)
class SilcConfig:
    """Learning gain, reference and power policy for a build."""

    gamma: float
    reference: float
    power_nominal: float
    power_min: float | None = 0.0
    power_max: float | None = 400.0
    start_layer: int = 10

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be strictly positive")
        if self.start_layer < 1:
            raise ValueError("start_layer must be >= 1")
        lo = -np.inf if self.power_min is None else self.power_min
        hi = np.inf if self.power_max is None else self.power_max
        if not (lo <= self.power_nominal <= hi):
            raise ValueError("nominal power must sit inside the saturation bounds")


@dataclass
class SilcState:
    """Per-layer voxel maps: ids plus power, output and error vectors."""

    layer: int
    voxel_ids: list[int]
    power: np.ndarray
    output: np.ndarray = field(default_factory=lambda: np.zeros(0))
    error: np.ndarray = field(default_factory=lambda: np.zeros(0))


def output_error(reference, output: np.ndarray) -> np.ndarray:
    """Per-voxel error, scalar references broadcast."""
    return np.asarray(reference, dtype=float) - np.asarray(output, dtype=float)


def update_power(
    power: np.ndarray,
    error: np.ndarray,
    gamma: float,
    power_min: float | None = None,
    power_max: float | None = None,
) -> np.ndarray:
    """One learning step on a shared voxel index space, then saturation."""
    power = np.asarray(power, dtype=float)
    error = np.asarray(error, dtype=float)
    if power.shape != error.shape:
        raise DimensionError(f"power {power.shape} and error {error.shape} differ")
    out = power + gamma * error
    if power_min is not None or power_max is not None:
        out = np.clip(out, power_min, power_max)
    return out


def convergence_margin(spatial_gain: np.ndarray, gamma: float) -> float:
    """Spectral radius of (I - gamma * spatial gain); < 1 means the linear
    surrogate loop contracts."""
    g = np.asarray(spatial_gain)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"spatial gain must be square, got {g.shape}")
    m = np.eye(g.shape[0]) - gamma * g
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def carry_power_between_layers(
    prev_ids: list[int], prev_power: np.ndarray, new_ids: list[int], nominal: float
) -> np.ndarray:
    """Transfer the look-up table to the next layer's voxel set.

    Voxels present in both layers keep their value bit for bit; voxels new
    to the next layer start at the nominal power.
    """
    table = dict(zip(prev_ids, np.asarray(prev_power, dtype=float)))
    return np.array([table.get(v, float(nominal)) for v in new_ids])


@dataclass(frozen=True)
class RasterParams:
    """Per-layer raster settings: hatch (m), speed (m/s), rotation (deg/layer)."""

    hatch: float
    speed: float
    rotation_deg: float = 0.0
    base_angle_deg: float = 0.0

    def angle(self, layer: int) -> float:
        if self.rotation_deg == 0.0:
            return self.base_angle_deg % 180.0
        return raster_angle(layer, self.rotation_deg, self.base_angle_deg)


@dataclass
class LayerRecord:
    """Everything the driver knows about one finished layer."""

    layer: int
    angle: float
    voxel_ids: list[int]
    power: np.ndarray
    output: np.ndarray
    error: np.ndarray
    n_steps: int


def run_closed_loop(
    spec: MeshSpec,
    mat: MaterialParams,
    geom: PartGeometry,
    raster: RasterParams,
    vspec: VoxelGridSpec,
    meas: Measurement,
    cfg: SilcConfig,
    layers: int,
    lookup_mode: str = FORWARD,
    controlled: bool = True,
) -> list[LayerRecord]:
    """Simulate a build layer by layer under the learning law.

    Uncontrolled layers (open loop, or any layer up to the start layer) run
    at the nominal power.  Each layer starts from ambient after the recoat
    reset.  Set controlled=False for a pure open-loop reference build.
    """
    if layers < 0:
        raise ValueError("layer count must be >= 0")
    history: list[LayerRecord] = []
    state = ThermalState.zero(spec, layer=1)
    silc: SilcState | None = None
    for layer in range(1, min(layers, geom.n_layers) + 1):
        angle = raster.angle(layer)
        sched = generate_raster(geom, layer, raster.hatch, raster.speed, spec.dt, angle, spec)
        sets = register_samples(sched, vspec).observable()
        averaging = voxel_average_matrix(sets)
        lookup = power_lookup_matrix(sets, mode=lookup_mode)

        if silc is None:
            power = np.full(sets.n_voxels, float(cfg.power_nominal))
        else:
            power = carry_power_between_layers(
                silc.voxel_ids, silc.power, sets.voxel_ids, cfg.power_nominal
            )
            if controlled and silc.layer >= cfg.start_layer:
                prev_err = carry_power_between_layers(silc.voxel_ids, silc.error, sets.voxel_ids, 0.0)
                power = update_power(power, prev_err, cfg.gamma, cfg.power_min, cfg.power_max)

        commands = lookup @ power
        # a backward look-up leaves step 0 uncovered when its voxel was
        # dropped as unobservable; run that step at nominal power
        uncovered = lookup.sum(axis=1) == 0
        commands[uncovered] = cfg.power_nominal
        sys = build_system(spec, mat, geom, layer)
        masks = mask_sequence(sched, spec)
        state, outputs = simulate_layer(state, masks, commands, sys, meas, sched)
        voxel_out = averaging @ outputs
        err = output_error(cfg.reference, voxel_out)

        history.append(
            LayerRecord(
                layer=layer,
                angle=angle,
                voxel_ids=list(sets.voxel_ids),
                power=power,
                output=voxel_out,
                error=err,
                n_steps=sched.n_steps,
            )
        )
        silc = SilcState(layer=layer, voxel_ids=list(sets.voxel_ids), power=power, output=voxel_out, error=err)
        state = recoat_and_shift(state, spec)
    return history
