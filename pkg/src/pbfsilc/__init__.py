"""Layer-to-layer spatial control toolkit for powder bed fusion.

Finite-difference thermal plant, lifted layer-domain operators, output
controllability diagnostics and a spatial iterative learning controller,
exercised in closed-loop simulated builds.
"""

__version__ = "0.1.0"

from .controllability import (
    ControllabilityReport,
    build_report,
    is_strictly_diag_dominant,
    matrix_rank,
    output_controllability_matrix,
    spatial_dominance_check,
    triangular_full_rank,
    worst_decay_ratio,
)
from .errors import ConfigError, DimensionError, EmptyVoxelError, GeometryError, StabilityError
from .geometry import (
    PartGeometry,
    half_ellipsoid_part,
    load_mask_part,
    prism_part,
    rectangle_part,
)
from .grid import (
    MeshSpec,
    VoxelGridSpec,
    devectorize,
    element_to_voxel,
    flat_index,
    grid_coords,
    vectorize,
)
from .lifted import (
    BACKWARD,
    FORWARD,
    MAX_TEMP,
    MELTPOOL_AREA,
    SURFACE_SUM,
    LiftedSystem,
    Measurement,
    build_lifted_system,
    initial_response_matrix,
    layer_maps,
    measurement_vector,
    power_lookup_matrix,
    spatial_gain_matrix,
    state_transition,
    temporal_gain_matrix,
    voxel_average_matrix,
)
from .paths import (
    PathSchedule,
    SampleSets,
    generate_raster,
    mask_sequence,
    raster_angle,
    read_path_csv,
    register_samples,
    write_path_csv,
)
from .silc import (
    LayerRecord,
    RasterParams,
    SilcConfig,
    SilcState,
    carry_power_between_layers,
    convergence_margin,
    output_error,
    run_closed_loop,
    update_power,
)
from .thermal import (
    MaterialParams,
    SystemMatrices,
    ThermalState,
    build_system,
    cfl_number,
    corner_pulse_decay,
    layer_shift_matrix,
    recoat_and_shift,
    simulate_layer,
    step,
)
