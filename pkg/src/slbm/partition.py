"""Domain decomposition over the 1-D rank space.

A partition is nothing more than a contiguous chunk of the enumeration:
cutting the rank space into P nearly equal intervals assigns every fluid
node to exactly one owner. Communication follows from the adjacency
list: an entry whose target rank lives in another chunk is a ghost PDF
that must be exchanged every time the step reads it. Bounce-back
entries point at the node itself and never cross.

run_partitioned executes the decomposition for real: each partition gets
its own local PDF array (owned slots first, then a ghost tail holding
copies of remote values), a translated adjacency, and its own block
vector. Steps alternate a global exchange phase with a parallel
per-partition kernel phase, so the final field is identical to the
single-partition run no matter how many partitions or workers are used.

Two-stage renumbering: order the whole domain by a space-filling curve
(good chunk shapes, so little communication), cut into chunks, then
re-sort each chunk lexicographically (good run structure, so fast local
kernels). The second stage permutes ranks only within chunks, hence the
communication volume is untouched.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .enumeration import (
    Ordering,
    order_hilbert,
    order_lexicographic,
    renumber_within_chunks,
)
from .errors import PartitionError
from .kernels import (
    Counters,
    PdfField,
    TrtParams,
    _analytic_counters,
    _model_arrays,
    _step_aa_even,
    _step_aa_odd,
    _step_aa_odd_batched,
    _step_aa_odd_ria,
    _step_pull,
    _step_pull_ria,
    equilibrium_field,
    macroscopic,
    total_mass,
)
from .sparse import SparseLattice, build_adjacency, build_block_vector

PARTITIONED_VARIANTS = ("os-nt", "os-nt-r", "aa", "aa-r", "aa-rp")


@dataclass(frozen=True)
class PartitionMap:
    chunk_bounds: np.ndarray   # (P+1,) rank offsets, strictly increasing

    @property
    def p(self) -> int:
        return self.chunk_bounds.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.chunk_bounds)

    def owner_of(self, ranks: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.chunk_bounds, ranks, side="right") - 1


@dataclass(frozen=True)
class CommReport:
    sizes: np.ndarray            # nodes per partition
    incoming_pdfs: np.ndarray    # ghost PDFs each partition reads per step
    outgoing_pdfs: np.ndarray    # ghost PDFs each partition serves per step
    neighbor_counts: np.ndarray  # distinct partitions each one talks to
    total_ghost_pdfs: int
    total_ghost_bytes: int
    max_ghost_bytes: int
    mean_ghost_bytes: float

    @property
    def ghost_bytes(self) -> np.ndarray:
        return 8 * self.incoming_pdfs


def make_partition(ordering: Ordering, p: int) -> PartitionMap:
    """Cut the rank space into p contiguous chunks, sizes differing by <= 1."""
    n = ordering.n
    if not 1 <= p <= n:
        raise PartitionError(f"partition count {p} outside [1, {n}]")
    bounds = (np.arange(p + 1, dtype=np.int64) * n) // p
    return PartitionMap(chunk_bounds=bounds)


def comm_stats(lattice: SparseLattice, pmap: PartitionMap) -> CommReport:
    """Ghost-PDF accounting for one step under the pull convention."""
    flat = lattice.adjacency.flat
    stride = lattice.stride
    n = lattice.n
    p = pmap.p
    owner = pmap.owner_of(np.arange(n, dtype=np.int64))

    src_owner = np.broadcast_to(owner, flat.shape)
    dst_owner = owner[flat % stride]
    cross = src_owner != dst_owner

    incoming = np.bincount(src_owner[cross], minlength=p)
    outgoing = np.bincount(dst_owner[cross], minlength=p)

    pair_ids = src_owner[cross].astype(np.int64) * p + dst_owner[cross]
    pairs = np.unique(pair_ids)
    neigh = np.zeros(p, dtype=np.int64)
    if pairs.size:
        a, b = pairs // p, pairs % p
        neigh = np.bincount(a, minlength=p) + np.bincount(b, minlength=p)
        # each unordered pair appears once per direction; count partners once
        both = np.unique(np.concatenate([a * p + b, b * p + a]))
        neigh = np.bincount(both // p, minlength=p)

    total = int(cross.sum())
    ghost_bytes = 8 * incoming
    return CommReport(
        sizes=pmap.sizes,
        incoming_pdfs=incoming,
        outgoing_pdfs=outgoing,
        neighbor_counts=neigh,
        total_ghost_pdfs=total,
        total_ghost_bytes=8 * total,
        max_ghost_bytes=int(ghost_bytes.max()) if p else 0,
        mean_ghost_bytes=float(ghost_bytes.mean()) if p else 0.0,
    )


def renumber_partitions(geometry, model, p: int):
    """Space-filling-curve chunks, lexicographically re-sorted inside.

    Returns (ordering, partition_map). Chunk membership equals the plain
    curve cut, so communication statistics are identical; only the order
    within each chunk changes, which is what the run structure sees.
    """
    curve = order_hilbert(geometry)
    pmap = make_partition(curve, p)
    ordering = renumber_within_chunks(geometry, curve, pmap.chunk_bounds)
    return ordering, pmap


def partition_run_lengths(lattice: SparseLattice, pmap: PartitionMap) -> np.ndarray:
    """Mean RIA run length of each partition's chunk of the adjacency."""
    out = np.empty(pmap.p, dtype=np.float64)
    bounds = pmap.chunk_bounds
    for k in range(pmap.p):
        sl = lattice.adjacency.flat[:, bounds[k] : bounds[k + 1]]
        if sl.shape[1] == 0:
            out[k] = 0.0
            continue
        breaks = np.zeros(sl.shape[1], dtype=bool)
        breaks[1:] = ((sl[:, 1:] - sl[:, :-1]) != 1).any(axis=0)
        runs = 1 + int(breaks[1:].sum())
        out[k] = sl.shape[1] / runs
    return out


# ---------------------------------------------------------------------------
# partitioned execution
# ---------------------------------------------------------------------------

@dataclass
class _LocalPart:
    lo: int                    # global rank offset
    n: int                     # owned nodes
    adj: np.ndarray            # translated adjacency (q-1, n)
    run_starts: np.ndarray
    run_lengths: np.ndarray
    values: np.ndarray         # q*n owned slots + ghost tail
    back: np.ndarray | None    # second grid for two-grid variants
    ghost_addrs: np.ndarray    # global addresses mirrored in the tail


@dataclass
class _Exchange:
    reader: int
    owner: int
    src_offsets: np.ndarray    # into owner's local array
    dst_offsets: np.ndarray    # into reader's ghost tail


@dataclass
class PartitionedResult:
    field: PdfField
    comm: CommReport
    counters: Counters
    variant: str
    partitions: int
    workers: int
    steps: int
    elapsed_s: float
    mflups: float
    mass: float
    max_velocity: float
    exchanged_bytes: list
    mean_exchanged_bytes_per_step: float


def _translate(global_addrs, stride, pmap, part_lo, part_n, ghost_lookup):
    """Global flat addresses -> partition-local flat addresses."""
    slot = global_addrs // stride
    rank = global_addrs % stride
    local = np.empty_like(global_addrs)
    owned = (rank >= part_lo) & (rank < part_lo + part_n)
    local[owned] = slot[owned] * part_n + (rank[owned] - part_lo)
    if (~owned).any():
        gidx = ghost_lookup[np.searchsorted(ghost_lookup[:, 0],
                                            global_addrs[~owned]), 1]
        local[~owned] = 19 * part_n + gidx
    return local


def _build_parts(lattice, pmap, variant):
    """Local arrays, translated adjacency and exchange tables."""
    q = lattice.model.q
    stride = lattice.stride
    bounds = pmap.chunk_bounds
    flat = lattice.aa_flat() if variant.startswith("aa") else lattice.adjacency.flat
    owner_of_rank = pmap.owner_of(np.arange(lattice.n, dtype=np.int64))

    parts = []
    exchanges = []
    for k in range(pmap.p):
        lo, hi = int(bounds[k]), int(bounds[k + 1])
        pn = hi - lo
        cols = flat[:, lo:hi]
        ranks = cols % stride
        remote_mask = (ranks < lo) | (ranks >= hi)
        remote = np.unique(cols[remote_mask])
        ghost_lookup = np.column_stack(
            [remote, np.arange(remote.size, dtype=remote.dtype)]
        ) if remote.size else np.empty((0, 2), dtype=cols.dtype)

        local_adj = _translate(cols.ravel(), stride, pmap, lo, pn,
                               ghost_lookup).reshape(cols.shape)
        breaks = np.zeros(pn, dtype=bool)
        if pn:
            breaks[1:] = ((local_adj[:, 1:] - local_adj[:, :-1]) != 1).any(axis=0)
        edges = np.concatenate(
            [[0], np.flatnonzero(breaks[1:]) + 1, [pn]]
        ) if pn else np.array([0, 0])
        run_starts = edges[:-1].astype(np.int64)
        run_lengths = np.diff(edges).astype(np.int64)

        values = np.zeros(q * pn + remote.size, dtype=np.float64)
        back = np.zeros_like(values) if variant.startswith("os-nt") else None
        parts.append(_LocalPart(lo=lo, n=pn, adj=local_adj,
                                run_starts=run_starts, run_lengths=run_lengths,
                                values=values, back=back, ghost_addrs=remote))

    # exchange tables: group each partition's ghosts by owning partition
    for k, part in enumerate(parts):
        if part.ghost_addrs.size == 0:
            continue
        g_ranks = part.ghost_addrs % stride
        g_slots = part.ghost_addrs // stride
        owners = owner_of_rank[g_ranks]
        for s in np.unique(owners):
            sel = np.flatnonzero(owners == s)
            sp = parts[int(s)]
            src = g_slots[sel] * sp.n + (g_ranks[sel] - sp.lo)
            dst = 19 * part.n + sel
            exchanges.append(_Exchange(reader=k, owner=int(s),
                                       src_offsets=src.astype(np.int64),
                                       dst_offsets=dst.astype(np.int64)))
    return parts, exchanges


def run_partitioned(
    geometry,
    model,
    params: TrtParams,
    variant: str,
    p: int,
    workers: int = 1,
    n_steps: int = 0,
    v: int = 4,
    ordering: Ordering | None = None,
    lattice: SparseLattice | None = None,
) -> PartitionedResult:
    """Run n_steps over p partitions executed by a thread pool.

    Exchange phases and kernel phases strictly alternate; kernels only
    read ghost copies refreshed in the preceding exchange, so results
    are independent of p, worker count and scheduling order. Single-grid
    variants additionally push odd-step output parked in ghost slots
    back to the owners after the step.
    """
    if variant not in PARTITIONED_VARIANTS:
        raise ValueError(
            f"unknown variant {variant!r}, pick one of {PARTITIONED_VARIANTS}"
        )
    if workers < 1:
        raise PartitionError(f"worker count must be >= 1, got {workers}")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if variant.startswith("aa") and n_steps % 2:
        raise ValueError("single-grid variants need an even n_steps")

    if lattice is None:
        if ordering is None:
            ordering = order_lexicographic(geometry)
        adjacency = build_adjacency(geometry, ordering, model)
        lattice = SparseLattice(
            geometry=geometry, model=model, ordering=ordering,
            adjacency=adjacency, block=build_block_vector(adjacency),
        )
    pmap = make_partition(lattice.ordering, p)
    comm = comm_stats(lattice, pmap)

    w, cx, cy, cz, opp = _model_arrays(model)
    fx, fy, fz = (float(a) for a in params.body_force)
    om_e, om_o = params.omega_even, params.omega_odd
    two_grid = variant.startswith("os-nt")

    parts, exchanges = _build_parts(lattice, pmap, variant)
    for part in parts:
        for i in range(model.q):
            part.values[i * part.n : (i + 1) * part.n] = model.w[i]

    def pull_ghosts():
        moved = 0
        for ex in exchanges:
            src = parts[ex.owner].values
            parts[ex.reader].values[ex.dst_offsets] = src[ex.src_offsets]
            moved += ex.src_offsets.size
        return moved

    def push_ghosts():
        moved = 0
        for ex in exchanges:
            dst = parts[ex.owner].values
            dst[ex.src_offsets] = parts[ex.reader].values[ex.dst_offsets]
            moved += ex.src_offsets.size
        return moved

    def kernel(part: _LocalPart, parity: int):
        if part.n == 0:
            return
        if two_grid:
            if variant == "os-nt":
                _step_pull(part.values, part.back, part.adj, part.n, part.n,
                           w, cx, cy, cz, om_e, om_o, fx, fy, fz)
            else:
                _step_pull_ria(part.values, part.back, part.adj,
                               part.run_starts, part.run_lengths, part.n,
                               w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        elif parity == 0:
            _step_aa_even(part.values, part.n, part.n, opp,
                          w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        elif variant == "aa":
            _step_aa_odd(part.values, part.adj, part.n, opp,
                         w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        elif variant == "aa-r":
            _step_aa_odd_ria(part.values, part.adj, part.run_starts,
                             part.run_lengths, opp, w, cx, cy, cz,
                             om_e, om_o, fx, fy, fz)
        else:
            _step_aa_odd_batched(part.values, part.adj, part.run_starts,
                                 part.run_lengths, opp, v, w, cx, cy, cz,
                                 om_e, om_o, fx, fy, fz)

    counters = Counters()
    exchanged = []
    pool = ThreadPoolExecutor(max_workers=workers)

    t0 = time.perf_counter()
    try:
        for step in range(n_steps):
            parity = step % 2
            moved = 0
            if two_grid or parity == 1:
                moved += pull_ghosts()
            list(pool.map(lambda pt: kernel(pt, parity), parts))
            if not two_grid and parity == 1:
                moved += push_ghosts()
            if two_grid:
                for part in parts:
                    part.values, part.back = part.back, part.values
            exchanged.append(8 * moved)
            runs_total = sum(pt.run_lengths.size for pt in parts)
            add = _analytic_counters(variant, lattice.n, runs_total, parity)
            if parity == 0:
                counters.even = counters.even.add(add)
            else:
                counters.odd = counters.odd.add(add)
    finally:
        pool.shutdown(wait=True)
    elapsed = time.perf_counter() - t0

    fld = equilibrium_field(lattice, variant)
    for part in parts:
        owned = part.values[: 19 * part.n].reshape(model.q, part.n)
        fld.node_values()[:, part.lo : part.lo + part.n] = owned
    fld.parity = 0 if two_grid else n_steps % 2

    mass = total_mass(fld)
    if fld.storage == "arriving" and fld.parity != 0:
        max_vel = float("nan")
    else:
        _rho, u = macroscopic(fld, lattice, body_force=params.body_force)
        max_vel = float(np.sqrt((u ** 2).sum(axis=1)).max()) if lattice.n else 0.0
    mflups = lattice.n * n_steps / elapsed / 1e6 if n_steps and elapsed > 0 else 0.0
    mean_ex = float(np.mean(exchanged)) if exchanged else 0.0

    return PartitionedResult(
        field=fld,
        comm=comm,
        counters=counters,
        variant=variant,
        partitions=p,
        workers=workers,
        steps=n_steps,
        elapsed_s=elapsed,
        mflups=mflups,
        mass=mass,
        max_velocity=max_vel,
        exchanged_bytes=exchanged,
        mean_exchanged_bytes_per_step=mean_ex,
    )
