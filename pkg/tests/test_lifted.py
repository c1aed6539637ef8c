import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbfsilc import (
    BACKWARD,
    FORWARD,
    MAX_TEMP,
    MELTPOOL_AREA,
    SURFACE_SUM,
    EmptyVoxelError,
    Measurement,
    MeshSpec,
    PartGeometry,
    ThermalState,
    build_lifted_system,
    build_system,
    initial_response_matrix,
    layer_maps,
    measurement_vector,
    power_lookup_matrix,
    register_samples,
    simulate_layer,
    spatial_gain_matrix,
    state_transition,
    temporal_gain_matrix,
    voxel_average_matrix,
)
from pbfsilc.paths import SampleSets, mask_sequence

from conftest import STEEL, FIXTURE_SETS, fixture_layer

EXPECT_AVG = np.zeros((4, 10))
EXPECT_AVG[0, [0, 4, 5]] = 1.0 / 3.0
EXPECT_AVG[1, [1, 2, 3]] = 1.0 / 3.0
EXPECT_AVG[2, [6, 7]] = 0.5
EXPECT_AVG[3, [8, 9]] = 0.5

EXPECT_LOOKUP_BWD = np.array(
    [
        [1, 1, 0, 0, 0, 1, 1, 0, 0, 0],
        [0, 0, 1, 1, 1, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 1, 1, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    ],
    dtype=float,
).T

EXPECT_LOOKUP_FWD = np.array(
    [
        [1, 0, 0, 0, 1, 1, 0, 0, 0, 0],
        [0, 1, 1, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 1, 1],
    ],
    dtype=float,
).T


def fixture_sets():
    return SampleSets(
        voxel_ids=[1, 2, 3, 4],
        samples=[np.array(FIXTURE_SETS[v]) for v in (1, 2, 3, 4)],
        n_steps=10,
    )


def random_partition(rng, n_steps, n_voxels):
    """Random disjoint cover of 0..n_steps with every voxel sampled in 1..n."""
    ids = list(range(1, n_voxels + 1))
    while True:
        assign = rng.integers(0, n_voxels, size=n_steps + 1)
        sets = [np.nonzero(assign == i)[0] for i in range(n_voxels)]
        if all(np.any((s >= 1) & (s <= n_steps)) for s in sets):
            return SampleSets(voxel_ids=ids, samples=sets, n_steps=n_steps)


# ---------------------------------------------------------------- measurement


def test_surface_sum_block_structure():
    spec = MeshSpec(2, 2, 2, 1e-4, 1e-4, 1e-4, 1e-4)
    f = measurement_vector(Measurement(kind=SURFACE_SUM), 1, None, spec)
    assert np.array_equal(f, [0, 0, 0, 0, 1, 1, 1, 1])


def test_max_temp_one_hot_at_previous_position():
    spec, _, sched, _ = fixture_layer()
    f = measurement_vector(Measurement(kind=MAX_TEMP), 1, sched, spec)
    assert f[0] == 1.0 and f.sum() == 1.0  # struck element 1 at sample 0


def test_meltpool_vector_empty_above_threshold():
    spec = MeshSpec(3, 3, 1, 1e-4, 1e-4, 1e-4, 1e-4)
    state = np.full(spec.size, 10.0)
    f = measurement_vector(Measurement(kind=MELTPOOL_AREA, threshold=100.0), 1, None, spec, state)
    assert np.all(f == 0.0)


def test_meltpool_needs_state():
    spec = MeshSpec(3, 3, 1, 1e-4, 1e-4, 1e-4, 1e-4)
    with pytest.raises(ValueError):
        measurement_vector(Measurement(kind=MELTPOOL_AREA, threshold=1.0), 1, None, spec)


# ------------------------------------------------------------------ averaging


def test_average_matrix_matches_published_example():
    avg = voxel_average_matrix(fixture_sets())
    assert np.array_equal(avg, EXPECT_AVG)


def test_average_single_voxel():
    sets = SampleSets(voxel_ids=[1], samples=[np.array([0, 1, 2, 3])], n_steps=3)
    assert np.array_equal(voxel_average_matrix(sets), [[1 / 3, 1 / 3, 1 / 3]])


def test_average_empty_intersection_flagged():
    sets = SampleSets(voxel_ids=[1, 2], samples=[np.array([0]), np.array([1, 2])], n_steps=2)
    with pytest.raises(EmptyVoxelError):
        voxel_average_matrix(sets)


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10**6), st.integers(4, 30), st.integers(1, 6))
def test_average_rows_sum_to_one(seed, n_steps, n_voxels):
    rng = np.random.default_rng(seed)
    sets = random_partition(rng, n_steps, min(n_voxels, n_steps))
    avg = voxel_average_matrix(sets)
    assert np.allclose(avg.sum(axis=1), 1.0, atol=1e-14)


# --------------------------------------------------------------------- lookup


def test_lookup_matches_published_backward_example():
    assert np.array_equal(power_lookup_matrix(fixture_sets(), mode=BACKWARD), EXPECT_LOOKUP_BWD)


def test_lookup_forward_follows_definition():
    assert np.array_equal(power_lookup_matrix(fixture_sets(), mode=FORWARD), EXPECT_LOOKUP_FWD)


def test_lookup_single_voxel_is_ones_column():
    sets = SampleSets(voxel_ids=[1], samples=[np.array([0, 1, 2, 3])], n_steps=3)
    for mode in (BACKWARD, FORWARD):
        assert np.array_equal(power_lookup_matrix(sets, mode=mode), [[1.0], [1.0], [1.0]])


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10**6), st.integers(4, 30), st.integers(1, 6))
def test_lookup_row_and_column_structure(seed, n_steps, n_voxels):
    rng = np.random.default_rng(seed)
    sets = random_partition(rng, n_steps, min(n_voxels, n_steps))
    for mode in (BACKWARD, FORWARD):
        p = power_lookup_matrix(sets, mode=mode)
        assert np.all(p.sum(axis=1) <= 1.0)  # at most one voxel per command
        window = (0, n_steps - 1) if mode == BACKWARD else (1, n_steps)
        for j, samp in enumerate(sets.samples):
            if np.any((samp >= window[0]) & (samp <= window[1])):
                assert p[:, j].sum() >= 1.0


def test_forward_lookup_transposes_to_averaging():
    sets = fixture_sets()
    avg = voxel_average_matrix(sets)
    fwd = power_lookup_matrix(sets, mode=FORWARD)
    weights = np.array([1.0 / np.sum((s >= 1) & (s <= 10)) for s in sets.samples])
    assert np.allclose(avg, np.diag(weights) @ fwd.T)


# -------------------------------------------------------------- temporal gain


@pytest.fixture
def small_layer(small_spec, small_geom):
    from pbfsilc import generate_raster

    sched = generate_raster(small_geom, 3, 4e-4, 0.8, small_spec.dt, 0.0, small_spec)
    sys_m = build_system(small_spec, STEEL, small_geom, layer=3)
    return small_spec, small_geom, sched, sys_m


def test_gain_diagonal_is_instant_response(small_layer):
    spec, _, sched, sys_m = small_layer
    for kind in (SURFACE_SUM, MAX_TEMP):
        meas = Measurement(kind=kind)
        gain = temporal_gain_matrix(sys_m, sched, meas)
        masks = mask_sequence(sched, spec)
        for j in range(1, sched.n_steps + 1):
            f = measurement_vector(meas, j, sched, spec)
            expect = f @ (sys_m.input_gain * (sys_m.b @ masks[j - 1]))
            assert gain[j - 1, j - 1] == pytest.approx(expect, rel=1e-14)


def test_gain_columns_match_pulse_simulation(small_layer):
    spec, _, sched, sys_m = small_layer
    meas = Measurement(kind=MAX_TEMP)
    gain = temporal_gain_matrix(sys_m, sched, meas)
    assert np.all(np.triu(gain, k=1) == 0.0)
    masks = mask_sequence(sched, spec)
    for j in (1, sched.n_steps // 2, sched.n_steps):
        powers = np.zeros(sched.n_steps)
        powers[j - 1] = 1.0
        _, y = simulate_layer(ThermalState.zero(spec, 3), masks, powers, sys_m, meas, sched)
        assert np.max(np.abs(y - gain[:, j - 1])) < 1e-10


def test_gain_nonlinear_kind_rejected(small_layer):
    _, _, sched, sys_m = small_layer
    with pytest.raises(ValueError):
        temporal_gain_matrix(sys_m, sched, Measurement(kind=MELTPOOL_AREA, threshold=1.0))


def test_gain_det_is_diagonal_product(small_layer):
    _, _, sched, sys_m = small_layer
    gain = temporal_gain_matrix(sys_m, sched, Measurement(kind=MAX_TEMP))
    assert np.prod(np.diag(gain)) == pytest.approx(np.linalg.det(gain), rel=1e-9)


def test_full_output_equals_gain_times_commands(small_layer):
    spec, _, sched, sys_m = small_layer
    meas = Measurement(kind=SURFACE_SUM)
    gain = temporal_gain_matrix(sys_m, sched, meas)
    masks = mask_sequence(sched, spec)
    rng = np.random.default_rng(11)
    for _ in range(5):
        powers = 250.0 * rng.random(sched.n_steps)
        _, y = simulate_layer(ThermalState.zero(spec, 3), masks, powers, sys_m, meas, sched)
        assert np.allclose(y, gain @ powers, rtol=1e-9)


# ------------------------------------------------------------- free response


def test_initial_response_first_row(small_layer):
    spec, _, sched, sys_m = small_layer
    meas = Measurement(kind=SURFACE_SUM)
    rows = initial_response_matrix(sys_m, sched, meas)
    f1 = measurement_vector(meas, 1, sched, spec)
    assert np.allclose(rows[0], f1 @ sys_m.a.toarray(), atol=1e-14)


def test_initial_response_matches_zero_input_simulation(small_layer):
    spec, _, sched, sys_m = small_layer
    meas = Measurement(kind=SURFACE_SUM)
    rows = initial_response_matrix(sys_m, sched, meas)
    masks = mask_sequence(sched, spec)
    rng = np.random.default_rng(3)
    x0 = rng.random(spec.size)
    _, y = simulate_layer(ThermalState(x0, 3), masks, np.zeros(sched.n_steps), sys_m, meas, sched)
    assert np.allclose(y, rows @ x0, rtol=1e-12)


def test_zero_initial_state_output_is_gain_only(small_layer):
    spec, _, sched, sys_m = small_layer
    meas = Measurement(kind=SURFACE_SUM)
    gain = temporal_gain_matrix(sys_m, sched, meas)
    masks = mask_sequence(sched, spec)
    rng = np.random.default_rng(4)
    powers = rng.random(sched.n_steps)
    _, y = simulate_layer(ThermalState.zero(spec, 3), masks, powers, sys_m, meas, sched)
    assert np.allclose(y, gain @ powers, rtol=1e-12)


# ------------------------------------------------------------ recoat transfer


def test_layer_maps_default_reset_is_zero(small_layer):
    _, _, sched, sys_m = small_layer
    state_map, input_map = layer_maps(sys_m, sched)
    assert state_map.nnz == 0 and input_map.nnz == 0


def test_layer_maps_identity_reset_structure():
    spec = MeshSpec(3, 2, 2, 2e-4, 2e-4, 2e-4, 5e-4)
    geom = PartGeometry([np.ones((3, 2), bool)] * 4)
    sys_m = build_system(spec, STEEL, geom, layer=2)
    from pbfsilc import generate_raster

    sched = generate_raster(geom, 2, 4e-4, 0.8, spec.dt, 0.0, spec)
    state_map, input_map = layer_maps(sys_m, sched, reset=np.eye(spec.size))
    # new-top rows are zero, the rest is the shifted end-of-layer operator
    assert np.all(state_map[-spec.plane :, :] == 0.0)
    a_n = np.linalg.matrix_power(sys_m.a.toarray(), sched.n_steps)
    assert np.allclose(state_map[: spec.plane], a_n[spec.plane :], atol=1e-14)
    # input-map columns read off the propagated pulse responses
    masks = mask_sequence(sched, spec)
    for j in (0, sched.n_steps - 1):
        v = sys_m.input_gain * (sys_m.b @ masks[j])
        for _ in range(sched.n_steps - j - 1):
            v = sys_m.a @ v
        assert np.allclose(input_map[: spec.plane, j], v[spec.plane :], atol=1e-13)


def test_state_transition_identity_and_products():
    rng = np.random.default_rng(9)
    maps = [rng.random((4, 4)) for _ in range(4)]
    assert np.array_equal(state_transition(maps, 2, 2), np.eye(4))
    assert np.allclose(state_transition(maps, 3, 1), maps[2] @ maps[1])
    with pytest.raises(ValueError):
        state_transition(maps, 1, 2)


def test_state_transition_zero_maps():
    import scipy.sparse as sp

    maps = [sp.csr_matrix((3, 3))] * 3
    assert np.all(state_transition(maps, 3, 0) == 0.0)


# --------------------------------------------------------------- spatial gain


def test_spatial_gain_identity_operators():
    rng = np.random.default_rng(2)
    gain = np.tril(rng.random((5, 5)))
    eye = np.eye(5)
    assert np.array_equal(spatial_gain_matrix(eye, gain, eye), gain)


def test_spatial_gain_dimension_error():
    from pbfsilc import DimensionError

    with pytest.raises(DimensionError):
        spatial_gain_matrix(np.zeros((2, 3)), np.zeros((4, 4)), np.zeros((4, 2)))


def test_spatial_gain_forward_factorization():
    rng = np.random.default_rng(8)
    sets = fixture_sets()
    gain = np.tril(rng.random((10, 10)))
    avg = voxel_average_matrix(sets)
    fwd = power_lookup_matrix(sets, mode=FORWARD)
    weights = np.diag([1.0 / np.sum((s >= 1) & (s <= 10)) for s in sets.samples])
    expect = weights @ fwd.T @ gain @ fwd
    assert np.allclose(spatial_gain_matrix(avg, gain, fwd), expect)


def test_end_to_end_voxel_gain_matches_simulation(small_layer):
    spec, _, sched, sys_m = small_layer
    vg_spec = None
    from pbfsilc import VoxelGridSpec

    vg_spec = VoxelGridSpec.cover(1, spec.n1, 1, spec.n2, 3)
    sets = register_samples(sched, vg_spec).observable()
    meas = Measurement(kind=MAX_TEMP)
    lifted = build_lifted_system(sys_m, sched, sets, meas, lookup_mode=FORWARD)
    masks = mask_sequence(sched, spec)
    rng = np.random.default_rng(21)
    for _ in range(5):
        voxel_power = 250.0 * rng.random(sets.n_voxels)
        commands = lifted.lookup @ voxel_power
        _, y = simulate_layer(ThermalState.zero(spec, 3), masks, commands, sys_m, meas, sched)
        assert np.allclose(lifted.averaging @ y, lifted.spatial_gain @ voxel_power, rtol=1e-9)


def test_lifted_system_invariants(small_layer):
    spec, _, sched, sys_m = small_layer
    from pbfsilc import VoxelGridSpec

    vg_spec = VoxelGridSpec.cover(1, spec.n1, 1, spec.n2, 3)
    sets = register_samples(sched, vg_spec).observable()
    lifted = build_lifted_system(sys_m, sched, sets, Measurement(kind=SURFACE_SUM))
    lifted.validate()
    assert np.all(lifted.temporal_gain >= 0.0)  # nonneg stencil, masks, sampling
