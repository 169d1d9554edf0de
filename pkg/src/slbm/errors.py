"""Exception types shared across the package.

Everything raised on purpose derives from SlbmError so callers (and the CLI)
can tell expected failures from bugs.
"""


class SlbmError(Exception):
    """Base class for all deliberate failures."""


class InvalidGeometryError(SlbmError):
    """Domain dimensions or flag data are unusable."""


class GeometryIOError(SlbmError):
    """Geometry file is malformed. Carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class PackingError(SlbmError):
    """Sphere packing ran out of room before reaching the target porosity."""

    def __init__(self, target_porosity, achieved_porosity, spheres_placed):
        super().__init__(
            "packing exhausted candidate sites at porosity "
            f"{achieved_porosity:.4f} (target {target_porosity:.4f}, "
            f"{spheres_placed} spheres placed)"
        )
        self.target_porosity = target_porosity
        self.achieved_porosity = achieved_porosity
        self.spheres_placed = spheres_placed


class TopologyError(SlbmError):
    """A fluid node has a neighbor outside the domain and no periodic rule."""


class PartitionError(SlbmError):
    """Partition bounds are not a valid contiguous split of the rank range."""


class InstabilityError(SlbmError):
    """The time stepping produced NaNs or non-positive density."""

    def __init__(self, step):
        super().__init__(f"simulation became unstable at step {step}")
        self.step = step
