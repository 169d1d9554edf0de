"""Velocity model and voxel geometries.

The discrete velocity set is the usual three-dimensional 19-direction
stencil: one rest direction, six axis neighbors, twelve edge diagonals.
Geometries are dense uint8 voxel grids (0 = fluid, 1 = solid) from which
the sparse machinery later extracts only the fluid nodes.

Two generators are provided: an open duct ("channel") with solid walls on
the four y/z faces and a periodic x axis, and a packed bed of equal solid
spheres inside such a duct. Both are deterministic for a given argument
tuple (the bed additionally takes an RNG seed).
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryIOError, InvalidGeometryError, PackingError

FLUID = 0
SOLID = 1

_MAGIC = b"SLBM"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class VelocityModel:
    """A discrete velocity stencil: directions, weights, opposite map."""

    name: str
    c: np.ndarray        # (q, 3) int8 direction vectors, index 0 is rest
    w: np.ndarray        # (q,) float64 quadrature weights
    opposite: np.ndarray  # (q,) int64, opposite[i] gives the reversed direction

    @property
    def q(self) -> int:
        return self.c.shape[0]

    @property
    def non_center(self) -> np.ndarray:
        """Indices of the moving directions (everything but the rest slot)."""
        return np.arange(1, self.q)


def _build_d3q19() -> VelocityModel:
    # Opposite directions are adjacent so opposite[] is a simple XOR-style
    # pairing: 1<->2, 3<->4, ...
    c = np.array(
        [
            (0, 0, 0),
            (1, 0, 0), (-1, 0, 0),
            (0, 1, 0), (0, -1, 0),
            (0, 0, 1), (0, 0, -1),
            (1, 1, 0), (-1, -1, 0),
            (1, -1, 0), (-1, 1, 0),
            (1, 0, 1), (-1, 0, -1),
            (1, 0, -1), (-1, 0, 1),
            (0, 1, 1), (0, -1, -1),
            (0, 1, -1), (0, -1, 1),
        ],
        dtype=np.int8,
    )
    w = np.empty(19, dtype=np.float64)
    w[0] = 1.0 / 3.0
    w[1:7] = 1.0 / 18.0
    w[7:] = 1.0 / 36.0
    opposite = np.zeros(19, dtype=np.int64)
    opposite[1:] = np.arange(1, 19) + np.where(np.arange(1, 19) % 2 == 1, 1, -1)
    return VelocityModel(name="D3Q19", c=c, w=w, opposite=opposite)


D3Q19 = _build_d3q19()


@dataclass
class Geometry:
    """A dense voxel domain.

    flags is a C-ordered (nx, ny, nz) uint8 array, so the z index varies
    fastest in memory, matching the on-disk layout. periodic marks the axes
    on which neighbor lookups wrap around; on all other axes a fluid voxel
    on the boundary face is a topology error once adjacency is built.
    """

    flags: np.ndarray
    name: str = "geometry"
    periodic: tuple[bool, bool, bool] = (False, False, False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.flags.ndim != 3:
            raise InvalidGeometryError("flags must be a 3-D array")
        if self.flags.dtype != np.uint8:
            self.flags = np.ascontiguousarray(self.flags, dtype=np.uint8)
        if not self.flags.flags.c_contiguous:
            self.flags = np.ascontiguousarray(self.flags)
        bad = (self.flags > 1).sum()
        if bad:
            raise InvalidGeometryError(f"{bad} voxels are neither FLUID nor SOLID")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.flags.shape


def fluid_count(geometry: Geometry) -> int:
    return int((geometry.flags == FLUID).sum())


def make_channel(nx: int, ny: int, nz: int) -> Geometry:
    """Open duct: solid walls on the y and z faces, fluid everywhere else.

    The x axis carries no walls and is treated as periodic, so every
    cross-section is identical and the fluid count is nx*(ny-2)*(nz-2).
    """
    if min(nx, ny, nz) < 3:
        raise InvalidGeometryError(
            f"channel needs nx,ny,nz >= 3, got ({nx},{ny},{nz})"
        )
    flags = np.full((nx, ny, nz), FLUID, dtype=np.uint8)
    flags[:, 0, :] = SOLID
    flags[:, -1, :] = SOLID
    flags[:, :, 0] = SOLID
    flags[:, :, -1] = SOLID
    return Geometry(
        flags=flags,
        name=f"channel-{nx}x{ny}x{nz}",
        periodic=(True, False, False),
        meta={"kind": "channel"},
    )


def _hcp_sites(nx, ny, nz, diameter, rng, jitter_scale=0.02):
    """Candidate sphere centers on a jittered close-packed layer lattice.

    Spacing is diameter*(1+2*jitter_scale); the per-axis jitter amplitude is
    bounded so that two jittered neighbors can never approach closer than
    the sphere diameter. Centers may sit near the walls (spheres rest
    against them) but stay clear of the x faces so nothing wraps around.
    """
    d = float(diameter)
    spacing = d * (1.0 + 2.0 * jitter_scale)
    # worst-case approach of two neighbors is 2*jitter*sqrt(3); keep it
    # strictly below the slack the spacing provides
    jitter = 0.98 * (spacing - d) / (2.0 * np.sqrt(3.0))

    layer_dy = spacing * np.sqrt(2.0 / 3.0)   # close-packed layer separation
    row_dz = spacing * np.sqrt(3.0) / 2.0     # row separation inside a layer

    x_lo, x_hi = d / 2.0, (nx - 1) - d / 2.0
    y_lo, y_hi = 1.0, float(ny - 2)
    z_lo, z_hi = 1.0, float(nz - 2)
    if x_hi < x_lo:
        return np.empty((0, 3))

    sites = []
    iy = 0
    y = y_lo
    while y <= y_hi + 1e-9:
        iz = 0
        z = z_lo + (iy % 2) * (row_dz / 3.0)
        while z <= z_hi + 1e-9:
            x0 = x_lo + ((iz % 2) + (iy % 2)) * (spacing / 2.0)
            xs = np.arange(x0, x_hi + 1e-9, spacing)
            for x in xs:
                sites.append((x, y, z))
            iz += 1
            z = z_lo + (iy % 2) * (row_dz / 3.0) + iz * row_dz
        iy += 1
        y = y_lo + iy * layer_dy
    sites = np.asarray(sites, dtype=np.float64)
    if len(sites):
        sites = sites + rng.uniform(-jitter, jitter, size=sites.shape)
    return sites


def make_fixed_bed(
    nx: int,
    ny: int,
    nz: int,
    diameter: float,
    target_porosity: float,
    seed: int,
) -> Geometry:
    """Channel filled with equal non-overlapping solid spheres.

    Spheres are inserted one at a time, in seeded random order, on a
    jittered close-packed site lattice (plain uniform rejection sampling
    jams near 38% solid fraction, far too dilute for realistic beds).
    Insertion stops when the fluid fraction, measured against the open
    channel's interior volume, first drops to <= target_porosity. Running
    out of candidate sites first raises PackingError with the achieved
    porosity. Identical arguments give identical geometries.
    """
    if not 0.0 < target_porosity < 1.0:
        raise InvalidGeometryError(
            f"target_porosity must be in (0,1), got {target_porosity}"
        )
    if diameter <= 0:
        raise InvalidGeometryError(f"diameter must be positive, got {diameter}")
    geometry = make_channel(nx, ny, nz)
    flags = geometry.flags
    open_fluid = fluid_count(geometry)
    target_fluid = target_porosity * open_fluid

    rng = np.random.default_rng(seed)
    sites = _hcp_sites(nx, ny, nz, diameter, rng)
    order = rng.permutation(len(sites))

    radius = diameter / 2.0
    rr = radius * radius
    fluid = open_fluid
    placed = 0
    centers = []
    for idx in order:
        cx, cy, cz = sites[idx]
        centers.append(sites[idx])
        xa = max(0, int(np.floor(cx - radius)))
        xb = min(nx - 1, int(np.ceil(cx + radius)))
        ya = max(0, int(np.floor(cy - radius)))
        yb = min(ny - 1, int(np.ceil(cy + radius)))
        za = max(0, int(np.floor(cz - radius)))
        zb = min(nz - 1, int(np.ceil(cz + radius)))
        gx = np.arange(xa, xb + 1, dtype=np.float64) - cx
        gy = np.arange(ya, yb + 1, dtype=np.float64) - cy
        gz = np.arange(za, zb + 1, dtype=np.float64) - cz
        inside = (
            gx[:, None, None] ** 2 + gy[None, :, None] ** 2 + gz[None, None, :] ** 2
        ) <= rr
        box = flags[xa : xb + 1, ya : yb + 1, za : zb + 1]
        newly_solid = int((inside & (box == FLUID)).sum())
        box[inside] = SOLID
        fluid -= newly_solid
        placed += 1
        if fluid <= target_fluid:
            porosity = fluid / open_fluid
            geometry.name = f"fixed-bed-{nx}x{ny}x{nz}-d{diameter:g}"
            geometry.meta.update(
                kind="fixed_bed",
                diameter=float(diameter),
                target_porosity=float(target_porosity),
                porosity=porosity,
                spheres=placed,
                seed=int(seed),
                centers=np.asarray(centers),
            )
            return geometry
    raise PackingError(target_porosity, fluid / open_fluid, placed)


def save_geometry(geometry: Geometry, path) -> None:
    """Write magic, version, dims (u32 LE each) and the raw flag bytes."""
    header = _MAGIC + struct.pack("<IIII", _FORMAT_VERSION, *geometry.dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(geometry.flags.tobytes())


def load_geometry(path) -> Geometry:
    """Read a geometry file, validating each field at its byte offset.

    Periodicity is not stored in the file; an axis is inferred periodic
    when any fluid voxel touches one of its boundary faces (the only way
    such a voxel can have a well-defined neighborhood).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != _MAGIC:
        raise GeometryIOError(f"bad magic {data[:4]!r}, expected {_MAGIC!r}", 0)
    if len(data) < 8:
        raise GeometryIOError("truncated header: missing format version", 4)
    (version,) = struct.unpack_from("<I", data, 4)
    if version != _FORMAT_VERSION:
        raise GeometryIOError(f"unsupported format version {version}", 4)
    if len(data) < 20:
        raise GeometryIOError("truncated header: missing dimensions", 8)
    nx, ny, nz = struct.unpack_from("<III", data, 8)
    if nx == 0 or ny == 0 or nz == 0:
        raise GeometryIOError(f"zero dimension ({nx},{ny},{nz})", 8)
    expected = nx * ny * nz
    payload = data[20:]
    if len(payload) < expected:
        raise GeometryIOError(
            f"truncated payload: expected {expected} flag bytes, got {len(payload)}",
            20 + len(payload),
        )
    if len(payload) > expected:
        raise GeometryIOError(
            f"trailing data: expected {expected} flag bytes, got {len(payload)}",
            20 + expected,
        )
    flags = np.frombuffer(payload, dtype=np.uint8).reshape(nx, ny, nz).copy()
    bad = int((flags > 1).sum())
    if bad:
        first = int(np.flatnonzero(flags.ravel() > 1)[0])
        raise GeometryIOError(f"invalid flag byte at voxel {first}", 20 + first)

    periodic = []
    for axis in range(3):
        lo = np.take(flags, 0, axis=axis)
        hi = np.take(flags, flags.shape[axis] - 1, axis=axis)
        periodic.append(bool((lo == FLUID).any() or (hi == FLUID).any()))
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return Geometry(flags=flags, name=name, periodic=tuple(periodic))
