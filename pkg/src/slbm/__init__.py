"""Sparse-lattice lattice Boltzmann engine with run-compressed addressing.

The package builds sparse D3Q19 lattices over voxel geometries, runs
two-relaxation-time flow kernels in several propagation variants (two-grid
and in-place single-grid, with and without run-length-compressed index
addressing), and provides analytic roofline/ECM performance models plus a
partitioned execution harness with in-process halo exchange.
"""

__version__ = "0.1.0"

from .enumeration import (
    Ordering,
    order_hilbert,
    order_lexicographic,
    renumber_within_chunks,
)
from .errors import (
    GeometryIOError,
    InstabilityError,
    InvalidGeometryError,
    PackingError,
    PartitionError,
    SlbmError,
    TopologyError,
)
from .kernels import (
    VARIANTS,
    Counters,
    PdfField,
    RunResult,
    StepCounters,
    TrtParams,
    arriving_values,
    equilibrium_field,
    macroscopic,
    run,
    total_mass,
    trt_collide,
)
from .model import (
    FLUID,
    SOLID,
    D3Q19,
    Geometry,
    VelocityModel,
    fluid_count,
    load_geometry,
    make_channel,
    make_fixed_bed,
    save_geometry,
)
from .partition import (
    CommReport,
    PartitionedResult,
    PartitionMap,
    comm_stats,
    make_partition,
    partition_run_lengths,
    renumber_partitions,
    run_partitioned,
)
from .perfmodel import (
    EcmPrediction,
    LoopBalanceReport,
    MachineModel,
    TrafficConstants,
    ecm_blend,
    ecm_predict,
    in_cache_loop_balance,
    loop_balance,
    nets,
    roofline,
)
from .sparse import (
    AdjacencyList,
    BlockVector,
    RiaStats,
    SparseLattice,
    build_adjacency,
    build_block_vector,
    ria_stats,
)

__all__ = [name for name in dir() if not name.startswith("_")]
