"""Exception types shared across the toolkit."""


class StabilityError(ValueError):
    """Explicit diffusion step violates the CFL bound."""


class DimensionError(ValueError):
    """Operands do not have conformable shapes."""


class GeometryError(ValueError):
    """Part geometry is empty or does not fit the mesh."""


class EmptyVoxelError(ValueError):
    """A voxel holds no measurement sample inside the output range.

    Raised when the averaging operator would get an empty row, which
    breaks full row rank of the voxel output map.  Callers that want to
    proceed should drop the voxel from the active set first.
    """


class ConfigError(ValueError):
    """Run configuration is malformed; message carries the line number."""
