"""Explicit finite-difference heat-conduction plant.

Temperatures are ambient-shifted (ambient = 0 K).  One step advances the
state vector by x+ = A x + B u where A carries the 7-point conduction
stencil and B injects the surface input into the top layer.  The bottom of
the layer window faces the solidified part / build plate, which is held at
ambient (Dirichlet); every other boundary and the part contour toward
powder is adiabatic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, StabilityError
from .geometry import PartGeometry
from .grid import MeshSpec

DIRICHLET = "dirichlet"
ADIABATIC = "adiabatic"


@dataclass(frozen=True)
class MaterialParams:
    """Solid material constants: conductivity (W/(m K)), diffusivity (m^2/s)."""

    conductivity: float
    diffusivity: float

    def __post_init__(self):
        if self.conductivity <= 0 or self.diffusivity <= 0:
            raise ValueError("conductivity and diffusivity must be strictly positive")


@dataclass
class ThermalState:
    """Flat temperature vector over the layer window plus the current layer."""

    values: np.ndarray
    layer: int = 1

    @classmethod
    def zero(cls, spec: MeshSpec, layer: int = 1) -> "ThermalState":
        return cls(values=np.zeros(spec.size), layer=layer)


@dataclass
class SystemMatrices:
    """Step operator A, input map B and the scaling from watts to kelvin.

    `input_gain` converts a laser power in W into the temperature increment
    of a struck element for one time step.  `active` flags state entries
    that belong to the part; everything else stays at 0.
    """

    a: sp.csr_matrix
    b: sp.csr_matrix
    spec: MeshSpec
    input_gain: float
    active: np.ndarray
    cfl: float
    bottom: str = DIRICHLET


def cfl_number(spec: MeshSpec, mat: MaterialParams) -> float:
    return mat.diffusivity * spec.dt * (1.0 / spec.dx**2 + 1.0 / spec.dy**2 + 1.0 / spec.dz**2)


def build_system(
    spec: MeshSpec,
    mat: MaterialParams,
    geom: PartGeometry,
    layer: int,
    bottom: str = DIRICHLET,
    powder_ratio: float = 0.0,
) -> SystemMatrices:
    """Assemble A and B for the window whose top is build layer `layer`.

    Window slot k (1..window) holds build layer `layer - window + k`.
    Slots below build layer 1 belong to the substrate; their elements are
    held at ambient and act as Dirichlet neighbors when bottom=DIRICHLET.
    Out-of-part elements inside valid layers are powder: by default they
    are removed from the stencil (adiabatic mirror); `powder_ratio` > 0
    instead leaks the given fraction of the face flux into untracked powder.
    """
    c = cfl_number(spec, mat)
    if c > 0.5 + 1e-12:
        raise StabilityError(
            f"explicit diffusion step unstable: diffusivity*dt*(1/dx^2+1/dy^2+1/dz^2) = {c:.6g} > 0.5"
        )
    if bottom not in (DIRICHLET, ADIABATIC):
        raise ValueError(f"unknown bottom boundary {bottom!r}")

    n1, n2, w = spec.n1, spec.n2, spec.window
    shape3 = (n1, n2, w)
    active = np.zeros(shape3, dtype=bool)
    substrate = np.zeros(shape3, dtype=bool)
    for k in range(1, w + 1):
        abs_layer = layer - w + k
        if abs_layer < 1:
            substrate[:, :, k - 1] = True
        elif abs_layer <= geom.n_layers:
            active[:, :, k - 1] = geom.layer_mask(abs_layer)
        else:
            raise ValueError(f"layer {layer} exceeds the part's {geom.n_layers} layers")

    r = (
        mat.diffusivity * spec.dt / spec.dx**2,
        mat.diffusivity * spec.dt / spec.dy**2,
        mat.diffusivity * spec.dt / spec.dz**2,
    )
    flat = np.arange(spec.size).reshape(shape3, order="F")
    diag = np.where(active, 1.0, 0.0)
    rows, cols, vals = [], [], []

    for axis in range(3):
        for sign in (+1, -1):
            shifted_active = np.zeros(shape3, dtype=bool)
            shifted_substrate = np.zeros(shape3, dtype=bool)
            shifted_flat = np.zeros(shape3, dtype=np.int64)
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            # dst cells read their neighbor at +sign along axis
            dst[axis] = slice(None, -1) if sign > 0 else slice(1, None)
            src[axis] = slice(1, None) if sign > 0 else slice(None, -1)
            shifted_active[tuple(dst)] = active[tuple(src)]
            shifted_substrate[tuple(dst)] = substrate[tuple(src)]
            shifted_flat[tuple(dst)] = flat[tuple(src)]

            in_bounds = np.zeros(shape3, dtype=bool)
            in_bounds[tuple(dst)] = True

            couple = active & shifted_active
            if couple.any():
                rows.append(flat[couple])
                cols.append(shifted_flat[couple])
                vals.append(np.full(int(couple.sum()), r[axis]))
                diag[couple] -= r[axis]

            # ambient-clamped neighbors: explicit substrate slots, plus the
            # face below the window when it is the build plate
            fixed = active & in_bounds & shifted_substrate
            if bottom == DIRICHLET:
                if axis == 2 and sign < 0:
                    below = np.zeros(shape3, dtype=bool)
                    below[:, :, 0] = active[:, :, 0]
                    fixed = fixed | below
                diag[fixed] -= r[axis]

            if powder_ratio > 0.0:
                powder = active & in_bounds & ~shifted_active & ~shifted_substrate
                diag[powder] -= powder_ratio * r[axis]
            # everything else (domain faces, part contour) is adiabatic

    rows.append(flat.ravel(order="F"))
    cols.append(flat.ravel(order="F"))
    vals.append(diag.ravel(order="F"))
    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(spec.size, spec.size),
    )

    top_active = active[:, :, w - 1].ravel(order="F")
    b_rows = spec.top_offset + np.nonzero(top_active)[0]
    b_cols = np.nonzero(top_active)[0]
    b = sp.csr_matrix(
        (np.ones(len(b_rows)), (b_rows, b_cols)), shape=(spec.size, spec.plane)
    )

    gain = mat.diffusivity * spec.dt / (mat.conductivity * spec.dx * spec.dy * spec.dz)
    return SystemMatrices(
        a=a,
        b=b,
        spec=spec,
        input_gain=gain,
        active=active.ravel(order="F"),
        cfl=c,
        bottom=bottom,
    )


def step(state: ThermalState, u: np.ndarray, sys: SystemMatrices) -> ThermalState:
    """One explicit step: A x + B u.  `u` is the surface input in kelvin units."""
    x = np.asarray(state.values)
    u = np.asarray(u)
    if x.shape != (sys.spec.size,):
        raise DimensionError(f"state length {x.shape} != {sys.spec.size}")
    if u.shape != (sys.spec.plane,):
        raise DimensionError(f"input length {u.shape} != {sys.spec.plane}")
    return ThermalState(values=sys.a @ x + sys.b @ u, layer=state.layer)


def layer_shift_matrix(spec: MeshSpec) -> sp.csr_matrix:
    """Recoat shift: old slot k+1 moves to slot k, the new top is zeroed."""
    n = spec.size
    keep = n - spec.plane
    rows = np.arange(keep)
    cols = np.arange(spec.plane, n)
    return sp.csr_matrix((np.ones(keep), (rows, cols)), shape=(n, n))


def recoat_and_shift(state: ThermalState, spec: MeshSpec, reset=None) -> ThermalState:
    """Advance to the next layer across a recoat interval.

    `reset` maps the end-of-layer state to the pre-shift temperature field;
    the default None is the ambient reset (everything cools to 0), which
    makes the returned state exactly zero.
    """
    if state.values.shape != (spec.size,):
        raise DimensionError(f"state length {state.values.shape} != {spec.size}")
    if reset is None:
        carried = np.zeros(spec.size)
    else:
        carried = np.asarray(reset @ state.values)
    out = np.zeros(spec.size)
    out[: spec.size - spec.plane] = carried[spec.plane :]
    return ThermalState(values=out, layer=state.layer + 1)


def simulate_layer(
    state0: ThermalState,
    masks: np.ndarray,
    powers: np.ndarray,
    sys: SystemMatrices,
    measurement,
    sched=None,
) -> tuple[ThermalState, np.ndarray]:
    """Run one layer and record the per-sample outputs.

    masks    (n_steps, plane) power-distribution rows (see paths.mask_sequence)
    powers   laser power per step in W, length n_steps
    Returns the state after the last step and the output vector with one
    entry per step n = 1..n_steps, produced by `measurement` (a
    lifted.Measurement; position-based kinds need `sched`).
    """
    from .lifted import sample_output  # local import to avoid a cycle

    powers = np.asarray(powers, dtype=float)
    masks = np.asarray(masks, dtype=float)
    n_steps = len(powers)
    if masks.shape != (n_steps, sys.spec.plane):
        raise DimensionError(
            f"mask block {masks.shape} does not match {n_steps} steps x {sys.spec.plane} elements"
        )
    x = np.array(state0.values, dtype=float)
    if x.shape != (sys.spec.size,):
        raise DimensionError(f"state length {x.shape} != {sys.spec.size}")
    outputs = np.zeros(n_steps)
    for n in range(n_steps):
        u = sys.input_gain * powers[n] * masks[n]
        x = sys.a @ x + sys.b @ u
        outputs[n] = sample_output(measurement, n + 1, x, sys.spec, sched)
    return ThermalState(values=x, layer=state0.layer), outputs


def corner_pulse_decay(
    mat: MaterialParams,
    spec: MeshSpec,
    samples: int,
    camera_dt: float = 5e-4,
    pulse_watts: float = 1.0,
) -> np.ndarray:
    """Corner temperature at each camera sample after a single laser pulse.

    The part is a solid block filling the mesh with adiabatic boundaries on
    every face; the pulse strikes the top corner element (1, 1).  The mesh
    time step must divide the camera period.  Entry 0 is the temperature
    right after injection, before any conduction step.
    """
    substeps = camera_dt / spec.dt
    if abs(substeps - round(substeps)) > 1e-9 or round(substeps) < 1:
        raise ValueError(f"camera period {camera_dt} is not a multiple of dt {spec.dt}")
    substeps = int(round(substeps))
    block = PartGeometry([np.ones((spec.n1, spec.n2), dtype=bool)] * spec.window)
    sys = build_system(spec, mat, block, layer=spec.window, bottom=ADIABATIC)
    corner = spec.top_offset  # element (1, 1) on the top layer
    x = np.zeros(spec.size)
    x[corner] = sys.input_gain * pulse_watts
    seq = np.zeros(samples)
    seq[0] = x[corner]
    for m in range(1, samples):
        for _ in range(substeps):
            x = sys.a @ x
        seq[m] = x[corner]
    return seq
