"""Single-relaxation-time D3Q19 kernels on a voxel grid.

State lives in a two-buffer population array shaped (19, nx, ny, nz) in C
order; cell (x, y, z) of direction i is f[i, x, y, z].  The serialized cell
order used by snapshots (x fastest, then y, then z) is produced with a
Fortran-order ravel at the protocol boundary.

Cells carry one of four flags.  Collision touches Liquid and Interface
cells only; Wall cells act through half-way bounce-back during streaming;
Gas cells hold stale populations that are never read (the free-surface
layer reconstructs any population that would have streamed out of Gas).

Streaming is a pull: f_i(x, t+1) = f_i(x - c_i, t), implemented as a flat
gather with precomputed periodic source indices, so a grid without walls
wraps around.  Closed domains are built by flagging the boundary faces as
Wall, which makes the wrap-around values unreachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .lattice import C, OPP, Q, W

VELOCITY_LIMIT = 0.3          # |u| at or above this is a stability fault
REFERENCE_GRAVITY = 5.0e-4    # lattice gravity anchoring the time mapping
PHYSICAL_G = 9.81             # m/s^2, used only to derive dt from dx


class CellFlag(IntEnum):
    GAS = 0
    LIQUID = 1
    INTERFACE = 2
    WALL = 3


class StabilityFault(RuntimeError):
    """Raised when a cell's density or speed leaves the stable range."""

    def __init__(self, message: str, cell: tuple[int, int, int] | None = None):
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class FluidParams:
    """Physics knobs of a run.

    dt is derived from the gravity magnitude and cell size so that the
    lattice gravity corresponds to 9.81 m/s^2: dt = sqrt(|g| * dx / 9.81).
    A zero gravity vector falls back to the reference magnitude 5e-4 so
    force-free runs still get a finite time mapping.
    """

    tau: float = 0.55
    gravity: tuple[float, float, float] = (0.0, 0.0, -5.0e-4)
    rho0: float = 1.0
    dx: float = 1.0 / 30.0
    dt: float = field(default=0.0)

    def __post_init__(self):
        if self.dt == 0.0:
            g = math.sqrt(sum(c * c for c in self.gravity)) or REFERENCE_GRAVITY
            object.__setattr__(self, "dt", math.sqrt(g * self.dx / PHYSICAL_G))
        if not self.tau > 0.5:
            raise ValueError(f"tau must exceed 0.5, got {self.tau}")
        if math.sqrt(sum(c * c for c in self.gravity)) > 0.01:
            raise ValueError(f"|gravity| must not exceed 0.01, got {self.gravity}")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError(f"dx and dt must be positive, got {self.dx}, {self.dt}")
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")


class MacroFields(NamedTuple):
    rho: np.ndarray   # density per cell
    u: np.ndarray     # velocity per cell, shape (3,) + cell shape


class GridGeometry:
    """Periodic pull-source index tables for a fixed grid size.

    SRC[i][n] is the flat C-order index of cell (x,y,z) - c_i, so streaming
    direction i is `f[i].flat <- f[i].flat[SRC[i]]`.  NB[i] = SRC[OPP[i]]
    addresses the neighbor at +c_i and serves every neighbor gather (flags,
    fill fractions, opposite populations) in the free-surface layer.
    """

    def __init__(self, dims: tuple[int, int, int]):
        nx, ny, nz = dims
        self.dims = (int(nx), int(ny), int(nz))
        self.n = nx * ny * nz
        idx = np.arange(self.n, dtype=np.int64).reshape(self.dims)
        src = np.empty((Q, self.n), dtype=np.int64)
        for i in range(Q):
            src[i] = np.roll(idx, shift=tuple(C[i]), axis=(0, 1, 2)).ravel()
        self.SRC = src
        self.NB = src[OPP]

    def flat(self, x: int, y: int, z: int) -> int:
        nx, ny, nz = self.dims
        return (x * ny + y) * nz + z


def _velocity_terms(ux, uy, uz):
    """c_i . u for every direction, reusing the diagonal sums.

    Each entry is a single rounded combination of at most two components,
    which keeps mirror-image directions bitwise equal on mirror-symmetric
    states (see lattice module docstring).
    """
    t3 = ux + uy
    t4 = uy - ux
    t7 = ux + uz
    t8 = uz - ux
    t15 = uy + uz
    t17 = uy - uz
    return (
        None,
        ux, -ux,
        t3, t4,
        -t4, -t3,
        t7, t8,
        -t8, -t7,
        uy, -uy,
        uz, -uz,
        t15, -t15,
        t17, -t17,
    )


def moments(f: np.ndarray) -> MacroFields:
    """Density and velocity of a population array shaped (19, ...).

    The reductions are grouped by (+x, -x) direction pairs before summing,
    so they are exact under x mirroring.  Cells with rho <= 0 get u = 0;
    such cells are either Gas/Wall storage (never used) or about to trip
    the stability guard.
    """
    p1 = f[1] + f[2]
    p3 = f[3] + f[4]
    p5 = f[5] + f[6]
    p7 = f[7] + f[8]
    p9 = f[9] + f[10]
    rho = (
        f[0] + p1 + p3 + p5 + p7 + p9
        + f[11] + f[12] + f[13] + f[14]
        + f[15] + f[16] + f[17] + f[18]
    )
    mx = (f[1] - f[2]) + (f[3] - f[4]) + (f[5] - f[6]) + (f[7] - f[8]) + (f[9] - f[10])
    my = (p3 - p5) + (f[11] - f[12]) + (f[15] - f[16]) + (f[17] - f[18])
    mz = (p7 - p9) + (f[13] - f[14]) + ((f[15] - f[16]) - (f[17] - f[18]))
    ok = rho > 0
    safe = np.where(ok, rho, 1.0)
    u = np.stack([
        np.where(ok, mx / safe, 0.0),
        np.where(ok, my / safe, 0.0),
        np.where(ok, mz / safe, 0.0),
    ])
    return MacroFields(rho, u)


def equilibrium(rho, u) -> np.ndarray:
    """Second-order Maxwell equilibrium.

    f_i^eq = w_i rho (1 + 3 c.u + 4.5 (c.u)^2 - 1.5 u^2).

    Args:
        rho: density, scalar or array.
        u: velocity, shape (3,) or (3,) + rho.shape.

    Returns:
        Array shaped (19,) + broadcast cell shape.
    """
    rho = np.asarray(rho, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    ux, uy, uz = u[0], u[1], u[2]
    usq = ux * ux + uy * uy + uz * uz
    base = 1.0 - 1.5 * usq
    cu = _velocity_terms(ux, uy, uz)
    out = np.empty((Q,) + np.broadcast(rho, usq).shape, dtype=np.float64)
    out[0] = W[0] * rho * base
    for i in range(1, Q):
        ci = cu[i]
        out[i] = (W[i] * rho) * (base + ci * (3.0 + 4.5 * ci))
    return out


def stability_guard(rho, ux, uy, uz, active, gravity, timestep: int = -1) -> None:
    """Fault when any active cell leaves the stable range.

    Checks post-collision values: forcing shifts the velocity by the full
    gravity vector in one step, so the guard looks at u + g.

    Raises:
        StabilityFault: some active cell has rho <= 0 or |u + g| >= 0.3.
    """
    gx, gy, gz = gravity
    vx = ux + gx
    vy = uy + gy
    vz = uz + gz
    usq = vx * vx + vy * vy + vz * vz
    bad = active & ((rho <= 0.0) | (usq >= VELOCITY_LIMIT * VELOCITY_LIMIT))
    if not bad.any():
        return
    flat = int(np.flatnonzero(bad.ravel())[0])
    shape = rho.shape if rho.ndim == 3 else None
    cell = tuple(int(v) for v in np.unravel_index(flat, shape)) if shape else (flat,)
    r = float(rho.ravel()[flat])
    s = float(math.sqrt(usq.ravel()[flat]))
    raise StabilityFault(
        f"stability fault at cell {cell} (step {timestep}): rho={r:.6g}, |u|={s:.6g}",
        cell=cell if shape else None,
    )


def _relax(f, rho, ux, uy, uz, active_f, params: FluidParams) -> None:
    """BGK relaxation plus first-order body force, in place on active cells."""
    omega = 1.0 / params.tau
    gx, gy, gz = params.gravity
    usq = ux * ux + uy * uy + uz * uz
    base = 1.0 - 1.5 * usq
    cu = _velocity_terms(ux, uy, uz)
    for i in range(Q):
        w = W[i]
        cg = C[i, 0] * gx + C[i, 1] * gy + C[i, 2] * gz
        if i == 0:
            feq = w * rho * base
        else:
            ci = cu[i]
            feq = (w * rho) * (base + ci * (3.0 + 4.5 * ci))
        delta = omega * (feq - f[i])
        if cg != 0.0:
            delta += (3.0 * w * cg) * rho
        delta *= active_f
        f[i] += delta


def collide(f: np.ndarray, flags: np.ndarray, params: FluidParams,
            timestep: int = -1) -> MacroFields:
    """One BGK collision over the whole grid.

    Relaxes Liquid and Interface cells toward equilibrium and applies the
    gravity forcing term w_i rho 3 (c_i . g); Gas and Wall storage is left
    untouched.  Density is conserved exactly; momentum changes by rho g per
    cell.  Returns the pre-collision macroscopic fields.

    Raises:
        StabilityFault: post-collision density or speed out of range.
    """
    fields = moments(f)
    rho, u = fields
    active = (flags == CellFlag.LIQUID) | (flags == CellFlag.INTERFACE)
    stability_guard(rho, u[0], u[1], u[2], active, params.gravity, timestep)
    _relax(f, rho, u[0], u[1], u[2], active.astype(np.float64), params)
    return fields


def stream(f: np.ndarray, flags: np.ndarray, out: np.ndarray,
           geom: GridGeometry | None = None,
           wall_src_idx: list[np.ndarray] | None = None) -> None:
    """Pull-stream post-collision populations from `f` into `out`.

    For each direction, out_i(x) = f_i(x - c_i) with periodic wrap; where
    the source cell is a Wall, the population is replaced by the half-way
    bounce-back value f_opp(i)(x) taken at the same cell.  Populations whose
    source is Gas are left holding the wrapped gather value; the
    free-surface reconstruction overwrites every such slot on Interface
    cells before anything reads it.

    Args:
        f: post-collision populations, (19, nx, ny, nz).
        flags: cell flags, (nx, ny, nz).
        out: destination buffer, same shape as f, fully overwritten.
        geom: optional precomputed geometry (built on the fly if missing).
        wall_src_idx: optional per-direction flat indices of active cells
            whose pull source is a Wall (precomputed by FlagCaches).
    """
    dims = f.shape[1:]
    if geom is None:
        geom = GridGeometry(dims)
    fv = f.reshape(Q, -1)
    ov = out.reshape(Q, -1)
    ov[0] = fv[0]
    for i in range(1, Q):
        np.take(fv[i], geom.SRC[i], out=ov[i])
    if wall_src_idx is None:
        flat = flags.ravel()
        active = (flat == CellFlag.LIQUID) | (flat == CellFlag.INTERFACE)
        wall_src_idx = [
            np.flatnonzero(active & (flat[geom.SRC[i]] == CellFlag.WALL))
            for i in range(Q)
        ]
    for i in range(1, Q):
        idx = wall_src_idx[i]
        if len(idx):
            ov[i, idx] = fv[OPP[i], idx]


def bounce_back(f: np.ndarray, flags: np.ndarray, cell: tuple[int, int, int],
                direction: int) -> float:
    """Population entering `cell` along `direction` off a Wall source.

    Half-way bounce-back: the post-collision population of the opposite
    direction at the same cell comes straight back.

    Raises:
        ValueError: the pull source of `direction` at `cell` is not a Wall.
    """
    dims = flags.shape
    x, y, z = cell
    cx, cy, cz = (int(v) for v in C[direction])
    src = ((x - cx) % dims[0], (y - cy) % dims[1], (z - cz) % dims[2])
    if flags[src] != CellFlag.WALL:
        raise ValueError(f"source {src} of direction {direction} at {cell} is not a wall")
    return float(f[(int(OPP[direction]),) + cell])
