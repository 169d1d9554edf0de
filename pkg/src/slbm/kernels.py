"""Collision and propagation kernels on the sparse lattice.

Collision is two-relaxation-time: symmetric (pairwise even) and
antisymmetric (pairwise odd) halves of each opposite-direction pair relax
at separate rates. The even rate fixes the shear viscosity, the odd rate
is derived from the even one through the product of their "distances from
stability" (the magic combination), and a constant body force enters
through the standard second-order forcing with the half-force velocity
shift.

Propagation variants, all reading the same adjacency structure:

* os-nt: two grids. Pull the 18 neighbor values through the adjacency
  list, collide, store straight to the destination grid. The source grid
  holds post-collision values; the pull does the streaming.
* os-nt-r: identical arithmetic and traversal, but inside each
  block-vector run the 18 addresses are kept in registers and incremented,
  instead of reloaded per node.
* aa: one grid, two alternating step shapes. Even steps read every node's
  own slots and write each result to the node's opposite slot (no
  indirection at all). Odd steps read the values the even step parked at
  the neighbors, collide, and push the results back through the very same
  addresses. After an even+odd pair the grid holds exactly what two
  two-grid steps would have produced.
* aa-r: aa with run-compressed addressing in the odd step.
* aa-rp: aa-r whose odd step additionally processes floor(len/v)*v nodes
  of every run in uniform width-v batches (the vectorizable shape); the
  remainder stays scalar. Results are identical, only addressing differs.

Storage convention: a two-grid field holds post-collision values (the
next step's pull does the streaming); a single-grid field at even parity
holds the already-streamed values arriving at each node. macroscopic()
accounts for that when forming moments, so all variants agree node for
node.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InstabilityError
from .sparse import SparseLattice

VARIANTS = ("os-nt", "os-nt-r", "aa", "aa-r", "aa-rp")


@dataclass(frozen=True)
class TrtParams:
    """Collision parameters. omega_odd is derived, never set directly."""

    omega_even: float = 1.0
    magic: float = 0.25
    body_force: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.omega_even < 2.0:
            raise ValueError(f"omega_even must be in (0,2), got {self.omega_even}")
        if self.magic <= 0.0:
            raise ValueError(f"magic must be positive, got {self.magic}")

    @property
    def omega_odd(self) -> float:
        half_even = 1.0 / self.omega_even - 0.5
        return 1.0 / (self.magic / half_even + 0.5)

    @property
    def viscosity(self) -> float:
        return (1.0 / self.omega_even - 0.5) / 3.0


@dataclass
class PdfField:
    """Flat slot-major PDF storage plus its interpretation."""

    values: np.ndarray
    stride: int
    n: int
    storage: str      # "post" (two-grid) or "arriving" (single-grid)
    parity: int = 0   # single-grid only: 0 = ready for an even step

    def node_values(self) -> np.ndarray:
        """(q, n) view without the padding tail."""
        q = self.values.size // self.stride
        return self.values.reshape(q, self.stride)[:, : self.n]


@dataclass
class StepCounters:
    """Modeled traffic of the steps of one parity (counts, not bytes)."""

    flups: int = 0
    pdf_loads: int = 0
    pdf_stores: int = 0
    index_loads: int = 0
    block_loads: int = 0

    def add(self, other: "StepCounters") -> "StepCounters":
        return StepCounters(
            self.flups + other.flups,
            self.pdf_loads + other.pdf_loads,
            self.pdf_stores + other.pdf_stores,
            self.index_loads + other.index_loads,
            self.block_loads + other.block_loads,
        )


@dataclass
class Counters:
    even: StepCounters = field(default_factory=StepCounters)
    odd: StepCounters = field(default_factory=StepCounters)

    def total(self) -> StepCounters:
        return self.even.add(self.odd)


@dataclass
class RunResult:
    field: PdfField
    counters: Counters
    variant: str
    steps: int
    elapsed_s: float
    mflups: float
    mass: float
    max_velocity: float
    batched_fraction: float | None = None


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(inline="always")
def _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz):
    # moments; pair-wise accumulation keeps u exactly zero for symmetric f
    rho = f[0]
    mx = 0.0
    my = 0.0
    mz = 0.0
    for i in range(1, 19, 2):
        j = i + 1
        rho += f[i] + f[j]
        mx += (f[i] - f[j]) * cx[i]
        my += (f[i] - f[j]) * cy[i]
        mz += (f[i] - f[j]) * cz[i]
    ux = (mx + 0.5 * fx) / rho
    uy = (my + 0.5 * fy) / rho
    uz = (mz + 0.5 * fz) / rho
    usq = ux * ux + uy * uy + uz * uz

    # rest direction is purely symmetric
    eq0 = w[0] * rho * (1.0 - 1.5 * usq)
    phi0 = -3.0 * w[0] * (ux * fx + uy * fy + uz * fz)
    out[0] = f[0] - om_e * (f[0] - eq0) + (1.0 - 0.5 * om_e) * phi0

    uf = ux * fx + uy * fy + uz * fz
    for i in range(1, 19, 2):
        j = i + 1  # opposite of i
        cu = cx[i] * ux + cy[i] * uy + cz[i] * uz
        cf = cx[i] * fx + cy[i] * fy + cz[i] * fz
        wi = w[i]
        eq_sym = wi * rho * (1.0 + 4.5 * cu * cu - 1.5 * usq)
        eq_anti = 3.0 * wi * rho * cu
        phi_sym = wi * (9.0 * cu * cf - 3.0 * uf)
        phi_anti = 3.0 * wi * cf
        f_sym = 0.5 * (f[i] + f[j])
        f_anti = 0.5 * (f[i] - f[j])
        relax_sym = om_e * (f_sym - eq_sym)
        relax_anti = om_o * (f_anti - eq_anti)
        force_sym = (1.0 - 0.5 * om_e) * phi_sym
        force_anti = (1.0 - 0.5 * om_o) * phi_anti
        out[i] = f[i] - relax_sym - relax_anti + force_sym + force_anti
        out[j] = f[j] - relax_sym + relax_anti + force_sym - force_anti


@njit(cache=True, nogil=True)
def _step_pull(src, dst, adj, stride, n, w, cx, cy, cz, om_e, om_o, fx, fy, fz):
    f = np.empty(19)
    out = np.empty(19)
    for node in range(n):
        f[0] = src[node]
        for k in range(18):
            f[k + 1] = src[adj[k, node]]
        _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        for i in range(19):
            dst[i * stride + node] = out[i]


@njit(cache=True, nogil=True)
def _step_pull_ria(
    src, dst, adj, run_starts, run_lengths, stride, w, cx, cy, cz,
    om_e, om_o, fx, fy, fz,
):
    f = np.empty(19)
    out = np.empty(19)
    ptr = np.empty(18, dtype=np.int64)
    for rr in range(run_starts.size):
        start = run_starts[rr]
        for k in range(18):
            ptr[k] = adj[k, start]
        for node in range(start, start + run_lengths[rr]):
            f[0] = src[node]
            for k in range(18):
                f[k + 1] = src[ptr[k]]
            _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
            for i in range(19):
                dst[i * stride + node] = out[i]
            for k in range(18):
                ptr[k] += 1


@njit(cache=True, nogil=True)
def _step_aa_even(grid, stride, n, opp, w, cx, cy, cz, om_e, om_o, fx, fy, fz):
    f = np.empty(19)
    out = np.empty(19)
    for node in range(n):
        for i in range(19):
            f[i] = grid[i * stride + node]
        _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        for i in range(19):
            grid[opp[i] * stride + node] = out[i]


@njit(cache=True, nogil=True)
def _step_aa_odd(grid, aa, n, opp, w, cx, cy, cz, om_e, om_o, fx, fy, fz):
    f = np.empty(19)
    out = np.empty(19)
    for node in range(n):
        f[0] = grid[node]
        for k in range(18):
            f[k + 1] = grid[aa[k, node]]
        _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        grid[node] = out[0]
        for k in range(18):
            grid[aa[k, node]] = out[opp[k + 1]]


@njit(cache=True, nogil=True)
def _step_aa_odd_ria(
    grid, aa, run_starts, run_lengths, opp, w, cx, cy, cz, om_e, om_o, fx, fy, fz
):
    f = np.empty(19)
    out = np.empty(19)
    ptr = np.empty(18, dtype=np.int64)
    for rr in range(run_starts.size):
        start = run_starts[rr]
        for k in range(18):
            ptr[k] = aa[k, start]
        for node in range(start, start + run_lengths[rr]):
            f[0] = grid[node]
            for k in range(18):
                f[k + 1] = grid[ptr[k]]
            _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
            grid[node] = out[0]
            for k in range(18):
                grid[ptr[k]] = out[opp[k + 1]]
            for k in range(18):
                ptr[k] += 1


@njit(cache=True, nogil=True)
def _step_aa_odd_batched(
    grid, aa, run_starts, run_lengths, opp, v, w, cx, cy, cz,
    om_e, om_o, fx, fy, fz,
):
    # Same numbers as _step_aa_odd_ria; the batched portion of each run is
    # addressed as base+lane with a uniform stride, the shape a SIMD gather
    # wants. No two node updates ever touch the same address, so doing all
    # of a batch's reads before its writes cannot change any result.
    f = np.empty(19)
    out = np.empty(19)
    ptr = np.empty(18, dtype=np.int64)
    fb = np.empty((19, v))
    ob = np.empty((19, v))
    for rr in range(run_starts.size):
        start = run_starts[rr]
        length = run_lengths[rr]
        for k in range(18):
            ptr[k] = aa[k, start]
        node = start
        batched_end = start + (length // v) * v
        while node < batched_end:
            for lane in range(v):
                fb[0, lane] = grid[node + lane]
            for k in range(18):
                base = ptr[k]
                for lane in range(v):
                    fb[k + 1, lane] = grid[base + lane]
            for lane in range(v):
                for i in range(19):
                    f[i] = fb[i, lane]
                _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
                for i in range(19):
                    ob[i, lane] = out[i]
            for lane in range(v):
                grid[node + lane] = ob[0, lane]
            for k in range(18):
                base = ptr[k]
                o = opp[k + 1]
                for lane in range(v):
                    grid[base + lane] = ob[o, lane]
            for k in range(18):
                ptr[k] += v
            node += v
        for node in range(batched_end, start + length):
            f[0] = grid[node]
            for k in range(18):
                f[k + 1] = grid[ptr[k]]
            _collide_node(f, out, w, cx, cy, cz, om_e, om_o, fx, fy, fz)
            grid[node] = out[0]
            for k in range(18):
                grid[ptr[k]] = out[opp[k + 1]]
            for k in range(18):
                ptr[k] += 1


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _model_arrays(model):
    cf = model.c.astype(np.float64)
    return (
        model.w,
        np.ascontiguousarray(cf[:, 0]),
        np.ascontiguousarray(cf[:, 1]),
        np.ascontiguousarray(cf[:, 2]),
        model.opposite.astype(np.int64),
    )


def equilibrium_field(lattice: SparseLattice, variant: str = "os-nt") -> PdfField:
    """Uniform rest-state field (density 1, velocity 0).

    Spatially uniform with zero velocity, the two storage conventions
    coincide, so this is the safe common starting point for every variant.
    """
    storage = "post" if variant.startswith("os-nt") else "arriving"
    q = lattice.model.q
    values = np.zeros(q * lattice.stride, dtype=np.float64)
    for i in range(q):
        values[i * lattice.stride : i * lattice.stride + lattice.n] = (
            lattice.model.w[i]
        )
    return PdfField(values=values, stride=lattice.stride, n=lattice.n,
                    storage=storage, parity=0)


def trt_collide(f: np.ndarray, params: TrtParams, model=None) -> np.ndarray:
    """Collide a (q,) state or a (q, m) batch of states. Pure function."""
    from .model import D3Q19

    model = model or D3Q19
    w, cx, cy, cz, _opp = _model_arrays(model)
    fx, fy, fz = params.body_force
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    fin = f.reshape(model.q, -1) if single else f
    out = np.empty_like(fin)
    buf_in = np.empty(model.q)
    buf_out = np.empty(model.q)
    for m in range(fin.shape[1]):
        buf_in[:] = fin[:, m]
        _collide_node(buf_in, buf_out, w, cx, cy, cz,
                      params.omega_even, params.omega_odd, fx, fy, fz)
        out[:, m] = buf_out
    return out[:, 0] if single else out


def arriving_values(field: PdfField, lattice: SparseLattice) -> np.ndarray:
    """(q, n) array of post-streaming PDFs at the field's current time."""
    nv = field.node_values()
    if field.storage == "arriving":
        if field.parity != 0:
            raise ValueError("single-grid field is mid-pair (odd parity)")
        return nv.copy()
    out = np.empty_like(nv)
    out[0] = nv[0]
    flat = field.values
    for k in range(lattice.model.q - 1):
        out[k + 1] = flat[lattice.adjacency.flat[k]]
    return out


def macroscopic(field: PdfField, lattice: SparseLattice, body_force=None):
    """Density and velocity per node from the arriving PDFs.

    With a body force the velocity carries the conventional half-force
    shift; by default it is the bare first moment.
    """
    arr = arriving_values(field, lattice)
    cf = lattice.model.c.astype(np.float64)
    rho = arr.sum(axis=0)
    mom = cf.T @ arr
    if body_force is not None:
        mom = mom + 0.5 * np.asarray(body_force, dtype=np.float64)[:, None]
    u = (mom / rho).T
    return rho, u


def total_mass(field: PdfField) -> float:
    return float(field.node_values().sum())


def _analytic_counters(variant: str, n: int, runs: int, parity: int) -> StepCounters:
    q = 19
    c = StepCounters(flups=n, pdf_loads=q * n, pdf_stores=q * n)
    if variant == "os-nt":
        c.index_loads = (q - 1) * n
    elif variant == "os-nt-r":
        c.index_loads = (q - 1) * runs
        c.block_loads = runs
    elif variant in ("aa", "aa-r", "aa-rp"):
        if parity == 1:
            if variant == "aa":
                c.index_loads = (q - 1) * n
            else:
                c.index_loads = (q - 1) * runs
                c.block_loads = runs
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return c


def _check_stable(field_values, stride, n, q, step):
    if not np.isfinite(field_values).all():
        raise InstabilityError(step)
    dens = field_values.reshape(q, stride)[:, :n].sum(axis=0)
    if (dens <= 0.0).any():
        raise InstabilityError(step)


def run(
    lattice: SparseLattice,
    variant: str,
    params: TrtParams,
    n_steps: int,
    v: int = 4,
    initial: np.ndarray | None = None,
    check_every: int = 1,
) -> RunResult:
    """Advance n_steps and report the field, traffic counters and rate.

    `initial` (q, n) overrides the uniform rest state and is interpreted
    in the variant's own storage convention. Single-grid variants need an
    even n_steps to end on a readable parity. Counters are analytic
    (deterministic) functions of node count, run count and step parity;
    only the wall-clock rate varies between repeats.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, pick one of {VARIANTS}")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if v < 1:
        raise ValueError("v must be >= 1")
    model = lattice.model
    w, cx, cy, cz, opp = _model_arrays(model)
    fx, fy, fz = (float(a) for a in params.body_force)
    om_e, om_o = params.omega_even, params.omega_odd
    n, stride, q = lattice.n, lattice.stride, model.q

    fld = equilibrium_field(lattice, variant)
    if initial is not None:
        initial = np.asarray(initial, dtype=np.float64)
        if initial.shape != (q, n):
            raise ValueError(f"initial must have shape {(q, n)}")
        fld.node_values()[:] = initial

    two_grid = variant.startswith("os-nt")
    src = fld.values
    dst = np.zeros_like(src) if two_grid else src
    adj = lattice.adjacency.flat
    aa = None if two_grid else lattice.aa_flat()
    starts = lattice.block.run_starts
    lengths = lattice.block.run_lengths
    runs = lattice.block.runs

    counters = Counters()
    t0 = time.perf_counter()
    for step in range(n_steps):
        parity = step % 2
        if two_grid:
            if variant == "os-nt":
                _step_pull(src, dst, adj, stride, n, w, cx, cy, cz,
                           om_e, om_o, fx, fy, fz)
            else:
                _step_pull_ria(src, dst, adj, starts, lengths, stride,
                               w, cx, cy, cz, om_e, om_o, fx, fy, fz)
            src, dst = dst, src
        else:
            if parity == 0:
                _step_aa_even(src, stride, n, opp, w, cx, cy, cz,
                              om_e, om_o, fx, fy, fz)
            elif variant == "aa":
                _step_aa_odd(src, aa, n, opp, w, cx, cy, cz,
                             om_e, om_o, fx, fy, fz)
            elif variant == "aa-r":
                _step_aa_odd_ria(src, aa, starts, lengths, opp, w, cx, cy, cz,
                                 om_e, om_o, fx, fy, fz)
            else:
                _step_aa_odd_batched(src, aa, starts, lengths, opp, v,
                                     w, cx, cy, cz, om_e, om_o, fx, fy, fz)
        bucket = counters.even if parity == 0 else counters.odd
        add = _analytic_counters(variant, n, runs, parity)
        if parity == 0:
            counters.even = bucket.add(add)
        else:
            counters.odd = bucket.add(add)
        if check_every and (step % check_every == 0 or step == n_steps - 1):
            _check_stable(src, stride, n, q, step)
    elapsed = time.perf_counter() - t0

    fld.values = src
    fld.parity = 0 if two_grid else n_steps % 2
    mass = total_mass(fld)
    if fld.storage == "arriving" and fld.parity != 0:
        max_vel = float("nan")
    else:
        _rho, u = macroscopic(fld, lattice, body_force=params.body_force)
        max_vel = float(np.sqrt((u ** 2).sum(axis=1)).max()) if n else 0.0
    mflups = n * n_steps / elapsed / 1e6 if n_steps and elapsed > 0 else 0.0

    batched = None
    if variant == "aa-rp":
        batched = float(((lengths // v) * v).sum() / n) if n else 0.0
    return RunResult(
        field=fld,
        counters=counters,
        variant=variant,
        steps=n_steps,
        elapsed_s=elapsed,
        mflups=mflups,
        mass=mass,
        max_velocity=max_vel,
        batched_fraction=batched,
    )
