"""Measurement functionals and the lifted layer-domain operators.

Within one layer the plant maps the stacked power commands
u = [u(0) .. u(n-1)] (W) to the stacked outputs y = [y(1) .. y(n)] through
a lower-triangular temporal gain matrix.  Voxel averaging compresses y to
the voxel output map and the power look-up expands the voxel power map to
u, giving the purely spatial gain (averaging @ temporal gain @ lookup).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, EmptyVoxelError
from .grid import MeshSpec
from .paths import PathSchedule, SampleSets
from .thermal import SystemMatrices, layer_shift_matrix

SURFACE_SUM = "surface_sum"
MAX_TEMP = "max_temp"
MELTPOOL_AREA = "meltpool_area"

BACKWARD = "backward"
FORWARD = "forward"


@dataclass(frozen=True)
class Measurement:
    """Per-sample output definition.

    surface_sum    scale * sum of top-layer temperatures
    max_temp       scale * temperature at the previous laser position (the
                   element peaks right after being struck)
    meltpool_area  scale * count of top-layer elements at or above threshold
    """

    kind: str
    threshold: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (SURFACE_SUM, MAX_TEMP, MELTPOOL_AREA):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.kind == MELTPOOL_AREA and (self.threshold is None or self.threshold <= 0):
            raise ValueError("meltpool_area needs a positive threshold")

    @property
    def linear(self) -> bool:
        return self.kind in (SURFACE_SUM, MAX_TEMP)


def measurement_vector(
    meas: Measurement,
    n: int,
    sched: PathSchedule | None,
    spec: MeshSpec,
    state: np.ndarray | None = None,
) -> np.ndarray:
    """Sampling vector f(n) so that y(n) = f(n) . x(n) for linear kinds.

    For meltpool_area the returned vector is the 0/1 melt-pool membership
    indicator evaluated on `state` (the area output is scale * sum of it).
    """
    if not (1 <= n):
        raise ValueError(f"sample index {n} must be >= 1")
    f = np.zeros(spec.size)
    top = spec.top_offset
    if meas.kind == SURFACE_SUM:
        f[top:] = meas.scale
    elif meas.kind == MAX_TEMP:
        if sched is None:
            raise ValueError("max_temp needs the path schedule")
        if sched.on[n - 1]:
            d1, d2 = sched.element(n - 1)
            f[top + (d1 - 1) + (d2 - 1) * spec.n1] = meas.scale
    else:
        if state is None:
            raise ValueError("meltpool_area needs the current state")
        hot = np.asarray(state)[top:] >= meas.threshold
        f[top:][hot] = 1.0
    return f


def sample_output(meas: Measurement, n: int, state: np.ndarray, spec: MeshSpec, sched=None) -> float:
    """Output value at sample n for a given state (fast path of the above)."""
    top = spec.top_offset
    if meas.kind == SURFACE_SUM:
        return meas.scale * float(np.sum(state[top:]))
    if meas.kind == MAX_TEMP:
        if sched is None:
            raise ValueError("max_temp needs the path schedule")
        if not sched.on[n - 1]:
            return 0.0
        d1, d2 = sched.element(n - 1)
        return meas.scale * float(state[top + (d1 - 1) + (d2 - 1) * spec.n1])
    return meas.scale * float(np.count_nonzero(state[top:] >= meas.threshold))


def voxel_average_matrix(sets: SampleSets, n_steps: int | None = None) -> np.ndarray:
    """Average-within-the-voxel operator from outputs y(1..n) to voxel outputs.

    Sample 0 never produces an output, so each row is normalized by the
    number of the voxel's samples that fall in 1..n; a voxel with none
    cannot be observed and raises EmptyVoxelError.
    """
    n = sets.n_steps if n_steps is None else n_steps
    q = np.zeros((sets.n_voxels, n))
    for i, samp in enumerate(sets.samples):
        inside = samp[(samp >= 1) & (samp <= n)]
        if len(inside) == 0:
            raise EmptyVoxelError(
                f"voxel {sets.voxel_ids[i]} has no sample in 1..{n}; drop it before averaging"
            )
        q[i, inside - 1] = 1.0 / len(inside)
    return q


def power_lookup_matrix(sets: SampleSets, n_steps: int | None = None, mode: str = BACKWARD) -> np.ndarray:
    """Look-up table from voxel powers to the stacked commands u(0..n-1).

    Row i corresponds to u(i-1).  BACKWARD selects the voxel holding sample
    i-1 (the laser's own position); FORWARD selects the voxel holding
    sample i (where the matching output lands).
    """
    if mode not in (BACKWARD, FORWARD):
        raise ValueError(f"unknown look-up mode {mode!r}")
    n = sets.n_steps if n_steps is None else n_steps
    p = np.zeros((n, sets.n_voxels))
    for j, samp in enumerate(sets.samples):
        rows = samp + 1 if mode == BACKWARD else samp
        rows = rows[(rows >= 1) & (rows <= n)]
        p[rows - 1, j] = 1.0
    return p


def _sampling_rows(meas: Measurement, sched: PathSchedule, spec: MeshSpec) -> np.ndarray:
    if not meas.linear:
        raise ValueError(f"{meas.kind} is state-dependent; lifted matrices need a linear kind")
    n = sched.n_steps
    f = np.zeros((n, spec.size))
    for i in range(1, n + 1):
        f[i - 1] = measurement_vector(meas, i, sched, spec)
    return f


def temporal_gain_matrix(
    sys: SystemMatrices, sched: PathSchedule, meas: Measurement, masks: np.ndarray | None = None
) -> np.ndarray:
    """Lower-triangular map from power commands (W) to outputs, one layer.

    Column j is the output history of a unit (1 W) pulse at step j-1,
    propagated forward through the step operator.
    """
    from .paths import mask_sequence

    spec = sys.spec
    n = sched.n_steps
    if masks is None:
        masks = mask_sequence(sched, spec)
    f = _sampling_rows(meas, sched, spec)
    gain = np.zeros((n, n))
    for j in range(1, n + 1):
        v = sys.input_gain * (sys.b @ masks[j - 1])
        for i in range(j, n + 1):
            gain[i - 1, j - 1] = f[i - 1] @ v
            if i < n:
                v = sys.a @ v
    return gain


def initial_response_matrix(sys: SystemMatrices, sched: PathSchedule, meas: Measurement) -> np.ndarray:
    """Rows f(n) A^n: maps the layer's initial state to the output history."""
    spec = sys.spec
    n = sched.n_steps
    f = _sampling_rows(meas, sched, spec)
    at = sys.a.T.tocsr()
    rows = np.zeros((n, spec.size))
    for i in range(1, n + 1):
        w = f[i - 1].copy()
        for _ in range(i):
            w = at @ w
        rows[i - 1] = w
    return rows


def layer_maps(
    sys: SystemMatrices, sched: PathSchedule, reset=None, masks: np.ndarray | None = None
):
    """State and input maps across the recoat boundary.

    Returns (state_map, input_map) taking (x(0, l), u(l)) to x(0, l+1).
    `reset` is the recoat cooling operator; the default ambient reset makes
    both maps exactly zero.
    """
    from .paths import mask_sequence

    spec = sys.spec
    n = sched.n_steps
    if reset is None:
        return (
            sp.csr_matrix((spec.size, spec.size)),
            sp.csr_matrix((spec.size, n)),
        )
    reset = np.asarray(reset)
    if reset.shape != (spec.size, spec.size):
        raise DimensionError(f"reset operator shape {reset.shape} != square {spec.size}")
    if masks is None:
        masks = mask_sequence(sched, spec)
    # columns j of the pre-reset input map: A^(n-j-1) B h(j)
    bt = np.zeros((spec.size, n))
    for j in range(n):
        v = sys.input_gain * (sys.b @ masks[j])
        for _ in range(n - j - 1):
            v = sys.a @ v
        bt[:, j] = v
    a_dense = sys.a.toarray()
    a_pow = np.linalg.matrix_power(a_dense, n)
    shift = layer_shift_matrix(spec).toarray()
    state_map = shift @ reset @ a_pow
    input_map = shift @ reset @ bt
    return state_map, input_map


def state_transition(state_maps, l1: int, l2: int) -> np.ndarray:
    """Product of per-layer state maps from layer l2 up to l1 (exclusive)."""
    if l1 < l2:
        raise ValueError(f"transition needs l1 >= l2, got {l1} < {l2}")
    if not len(state_maps):
        raise ValueError("need at least one state map to size the transition")
    dim = state_maps[0].shape[0]
    phi = np.eye(dim)
    for l in range(l2, l1):
        m = state_maps[l]
        m = m.toarray() if sp.issparse(m) else np.asarray(m)
        phi = m @ phi
    return phi


def spatial_gain_matrix(averaging: np.ndarray, gain: np.ndarray, lookup: np.ndarray) -> np.ndarray:
    """Voxel-power to voxel-output gain: averaging @ gain @ lookup."""
    averaging = np.asarray(averaging)
    gain = np.asarray(gain)
    lookup = np.asarray(lookup)
    if averaging.shape[1] != gain.shape[0] or gain.shape[1] != lookup.shape[0]:
        raise DimensionError(
            f"non-conformable: {averaging.shape} @ {gain.shape} @ {lookup.shape}"
        )
    return averaging @ gain @ lookup


@dataclass
class LiftedSystem:
    """All layer-domain operators for one layer's path and measurement."""

    temporal_gain: np.ndarray
    initial_response: np.ndarray
    recoat_state_map: object
    recoat_input_map: object
    averaging: np.ndarray
    lookup: np.ndarray
    spatial_gain: np.ndarray
    sets: SampleSets
    measurement: Measurement

    def validate(self, atol: float = 1e-12) -> None:
        """Structural sanity checks; raises AssertionError on violation."""
        n = self.temporal_gain.shape[0]
        assert self.temporal_gain.shape == (n, n)
        assert np.all(np.triu(self.temporal_gain, k=1) == 0.0), "gain must be lower triangular"
        g = self.averaging @ self.temporal_gain @ self.lookup
        assert np.allclose(g, self.spatial_gain, atol=atol)


def build_lifted_system(
    sys: SystemMatrices,
    sched: PathSchedule,
    sets: SampleSets,
    meas: Measurement,
    lookup_mode: str = FORWARD,
    reset=None,
) -> LiftedSystem:
    """Assemble every lifted operator for one layer."""
    gain = temporal_gain_matrix(sys, sched, meas)
    averaging = voxel_average_matrix(sets)
    lookup = power_lookup_matrix(sets, mode=lookup_mode)
    state_map, input_map = layer_maps(sys, sched, reset=reset)
    lifted = LiftedSystem(
        temporal_gain=gain,
        initial_response=initial_response_matrix(sys, sched, meas),
        recoat_state_map=state_map,
        recoat_input_map=input_map,
        averaging=averaging,
        lookup=lookup,
        spatial_gain=spatial_gain_matrix(averaging, gain, lookup),
        sets=sets,
        measurement=meas,
    )
    lifted.validate()
    return lifted
