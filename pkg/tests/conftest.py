import numpy as np
import pytest

from pbfsilc import (
    MaterialParams,
    MeshSpec,
    PartGeometry,
    PathSchedule,
    VoxelGridSpec,
    build_system,
    generate_raster,
)

STEEL = MaterialParams(conductivity=33.5, diffusivity=6e-6)


@pytest.fixture
def steel():
    return STEEL


@pytest.fixture
def small_spec():
    # 8x5 cross-section, 3-layer window, CFL number 0.225
    return MeshSpec(8, 5, 3, 2e-4, 2e-4, 2e-4, 5e-4)


@pytest.fixture
def small_geom(small_spec):
    full = np.ones((small_spec.n1, small_spec.n2), dtype=bool)
    return PartGeometry([full] * 6)


@pytest.fixture
def small_system(small_spec, small_geom):
    return build_system(small_spec, STEEL, small_geom, layer=3)


def fixture_layer():
    """6x6 single-layer block whose serpentine reproduces the published
    sample-registration example: hatch and sampling both 2 elements."""
    spec = MeshSpec(6, 6, 1, 2e-4, 2e-4, 2e-4, 5e-4)
    geom = PartGeometry([np.ones((6, 6), dtype=bool)])
    sched = generate_raster(geom, 1, hatch=4e-4, speed=0.8, dt=5e-4, angle=0.0, spec=spec)
    vg = VoxelGridSpec.cover(1, 6, 1, 6, 3)
    return spec, geom, sched, vg


FIXTURE_SETS = {
    1: [0, 1, 5, 6],
    2: [2, 3, 4],
    3: [7, 8],
    4: [9, 10],
}
