"""Sparse lattice: adjacency lists and their run-length compression.

Only fluid nodes are stored. PDF values live in one flat array laid out
slot-major: all nodes' direction-0 values first, then direction 1, and so
on, each section `stride` long (stride = node count + optional padding).
The address of (direction i, rank m) is therefore i*stride + m.

The adjacency list holds, for every fluid node and every moving direction,
the flat address the pull step reads for that direction: the upstream
neighbor's slot for the same direction, or - when the upstream voxel is
solid - the node's own slot for the opposite direction, which folds
halfway bounce-back into plain indirect addressing.

Because ranks follow an enumeration order, consecutive nodes frequently
read consecutive addresses in every one of the 18 directions at once. The
block vector records exactly these maximal runs; inside a run the kernel
can increment 18 pointers instead of reloading 18 indices per node, and
the run lengths double as the vectorization opportunity report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .enumeration import Ordering
from .errors import TopologyError
from .model import Geometry, VelocityModel

# accounting sizes, bytes (indices are counted at 4 B regardless of the
# dtype actually used in memory)
PDF_BYTES = 8
INDEX_BYTES = 4
BLOCK_ENTRY_BYTES = 4


@dataclass
class AdjacencyList:
    """Pull-addresses for all moving directions of all fluid nodes."""

    flat: np.ndarray          # (q-1, N) flat addresses, row k = direction k+1
    stride: int
    n: int
    bytes_per_entry: int = INDEX_BYTES

    def neighbor_ranks(self) -> np.ndarray:
        return (self.flat % self.stride).astype(np.int64)

    def slots(self) -> np.ndarray:
        return (self.flat // self.stride).astype(np.int64)


@dataclass
class BlockVector:
    """Maximal runs of address-contiguous nodes, in rank order."""

    run_lengths: np.ndarray   # int64, sums to n
    n: int

    @property
    def runs(self) -> int:
        return len(self.run_lengths)

    @property
    def run_starts(self) -> np.ndarray:
        starts = np.zeros(self.runs, dtype=np.int64)
        np.cumsum(self.run_lengths[:-1], out=starts[1:])
        return starts


@dataclass
class RiaStats:
    nodes: int
    runs: int
    r: float                   # runs per node
    mean_run_length: float
    vectorizable_fraction: float
    v: int


def build_adjacency(
    geometry: Geometry,
    ordering: Ordering,
    model: VelocityModel,
    padding: int = 0,
) -> AdjacencyList:
    """Build the flat pull-address table for one enumeration order.

    padding widens each direction section beyond the node count; it only
    shifts addresses and is exposed for layout experiments (no modeled
    effect anywhere else).
    """
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    coords = ordering.coords
    n = len(coords)
    stride = n + padding
    dims = geometry.dims
    addr_max = model.q * stride
    dtype = np.int32 if addr_max <= np.iinfo(np.int32).max else np.int64
    flat = np.empty((model.q - 1, n), dtype=dtype)
    self_ranks = np.arange(n, dtype=dtype)

    for k, i in enumerate(model.non_center):
        c = model.c[i]
        target = coords.astype(np.int64) - c
        for axis in range(3):
            if geometry.periodic[axis]:
                target[:, axis] %= dims[axis]
            else:
                out = (target[:, axis] < 0) | (target[:, axis] >= dims[axis])
                if out.any():
                    node = coords[np.flatnonzero(out)[0]]
                    raise TopologyError(
                        f"fluid node {tuple(int(v) for v in node)} has an "
                        f"out-of-bounds neighbor along direction "
                        f"{tuple(int(v) for v in c)} and axis {axis} is not "
                        "periodic"
                    )
        m = ordering.rank_grid[target[:, 0], target[:, 1], target[:, 2]]
        solid = m < 0
        opp = int(model.opposite[i])
        flat[k] = np.where(
            solid,
            opp * stride + self_ranks,
            i * stride + m.astype(dtype),
        )
    return AdjacencyList(flat=flat, stride=stride, n=n)


def build_block_vector(adjacency: AdjacencyList) -> BlockVector:
    """Greedy maximal runs: a run continues while every direction's
    address advances by exactly one from the previous node."""
    n = adjacency.n
    if n == 0:
        return BlockVector(run_lengths=np.empty(0, dtype=np.int64), n=0)
    breaks = np.zeros(n - 1, dtype=bool)
    for k in range(adjacency.flat.shape[0]):
        row = adjacency.flat[k]
        breaks |= (row[1:] - row[:-1]) != 1
    boundaries = np.flatnonzero(breaks) + 1
    edges = np.concatenate(([0], boundaries, [n]))
    return BlockVector(run_lengths=np.diff(edges).astype(np.int64), n=n)


def ria_stats(block: BlockVector, v: int = 4) -> RiaStats:
    """Run-density and batching statistics for vector width v."""
    if v < 1:
        raise ValueError(f"vector width must be >= 1, got {v}")
    nodes = block.n
    runs = block.runs
    if nodes == 0:
        return RiaStats(0, 0, 0.0, 0.0, 0.0, v)
    batched = int(((block.run_lengths // v) * v).sum())
    return RiaStats(
        nodes=nodes,
        runs=runs,
        r=runs / nodes,
        mean_run_length=nodes / runs,
        vectorizable_fraction=batched / nodes,
        v=v,
    )


@dataclass
class SparseLattice:
    """Everything the kernels need for one geometry + enumeration order."""

    geometry: Geometry
    model: VelocityModel
    ordering: Ordering
    adjacency: AdjacencyList
    block: BlockVector
    _aa_flat: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.adjacency.n

    @property
    def stride(self) -> int:
        return self.adjacency.stride

    def aa_flat(self) -> np.ndarray:
        """Odd-step addresses for the single-grid propagation pattern.

        Same neighbors as the pull table, opposite slots: where the pull
        table reads (neighbor, i) this reads/writes (neighbor, opposite-i),
        and bounce-back entries flip from (self, opposite-i) to (self, i).
        Swapping slots within a direction never changes run structure, so
        the block vector applies unchanged.
        """
        if self._aa_flat is None:
            stride = self.stride
            model = self.model
            flat = self.adjacency.flat
            aa = np.empty_like(flat)
            for k, i in enumerate(model.non_center):
                opp = int(model.opposite[i])
                slot = flat[k] // stride
                rank = flat[k] - slot * stride
                swapped = np.where(slot == i, opp, i).astype(flat.dtype)
                aa[k] = swapped * stride + rank
            self._aa_flat = aa
        return self._aa_flat

    @classmethod
    def from_parts(
        cls,
        geometry: Geometry,
        ordering: Ordering,
        model: VelocityModel,
        padding: int = 0,
    ) -> "SparseLattice":
        adjacency = build_adjacency(geometry, ordering, model, padding=padding)
        block = build_block_vector(adjacency)
        return cls(
            geometry=geometry,
            model=model,
            ordering=ordering,
            adjacency=adjacency,
            block=block,
        )
