"""Free-surface simulation state and the composed per-step pipeline."""

from __future__ import annotations

import numpy as np

from . import core, surface
from .core import CellFlag, FluidParams, GridGeometry, StabilityFault
from .lattice import Q
from .surface import ConversionConfig, FlagCaches


class Simulation:
    """Population grid, flags and mass field plus the step pipeline.

    One step runs, in order: moments, stability guard, collision, streaming
    with bounce-back, gas-side reconstruction, mass exchange (computed from
    the post-collision pre-stream populations, which are the values that
    crossed the faces), then the conversion sweep.  Two population buffers
    are swapped each step so a step is a pure function of the previous
    state; identical states therefore evolve bit-identically.
    """

    def __init__(self, dims: tuple[int, int, int],
                 params: FluidParams | None = None,
                 conv: ConversionConfig | None = None):
        self.dims = tuple(int(d) for d in dims)
        self.params = params or FluidParams()
        self.conv = conv or ConversionConfig()
        self.geom = GridGeometry(self.dims)
        self.f = np.zeros((Q,) + self.dims, dtype=np.float64)
        self._f2 = np.zeros_like(self.f)
        self.flags = np.full(self.dims, CellFlag.GAS, dtype=np.uint8)
        self.mass = np.zeros(self.dims, dtype=np.float64)
        self.timestep = 0
        self.last_report = surface.ConversionReport()
        self.last_macro: core.MacroFields | None = None
        self._caches: FlagCaches | None = None
        self._dirty = True

    # -- bookkeeping ------------------------------------------------------

    @property
    def caches(self) -> FlagCaches:
        if self._dirty or self._caches is None:
            self._caches = FlagCaches(self.flags, self.geom)
            self._dirty = False
        return self._caches

    def mark_flags_dirty(self) -> None:
        self._dirty = True

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def clone(self) -> "Simulation":
        other = Simulation(self.dims, self.params, self.conv)
        other.f[:] = self.f
        other.flags[:] = self.flags
        other.mass[:] = self.mass
        other.timestep = self.timestep
        return other

    def state_digest(self) -> bytes:
        """Raw bytes of the full state, for bit-identity comparisons."""
        return self.f.tobytes() + self.flags.tobytes() + self.mass.tobytes()

    # -- stepping ---------------------------------------------------------

    def step(self) -> None:
        """Advance one timestep.

        Raises:
            StabilityFault: a cell left the stable density/speed range; the
                state is left as it was before the step.
        """
        caches = self.caches
        rho, u = core.moments(self.f)
        core.stability_guard(rho, u[0], u[1], u[2],
                             caches.active.reshape(self.dims),
                             self.params.gravity, self.timestep)
        # kept for observers (detectors read flow speed without a second
        # moment pass); values describe the state the step started from
        self.last_macro = core.MacroFields(rho, u)
        flat_rho = rho.ravel()
        eps = surface.unclamped_fill(caches, self.mass.ravel(), flat_rho)
        core._relax(self.f, rho, u[0], u[1], u[2],
                    caches.active_f.reshape(self.dims), self.params)
        core.stream(self.f, self.flags, self._f2, self.geom, caches.wall_src)
        surface.reconstruct_from_gas(self.f, self._f2, u, caches)
        dm = surface.exchange_mass(self.f, caches, eps, self.geom)
        self.mass.ravel()[:] += dm
        self.f, self._f2 = self._f2, self.f
        # conversions can cascade: redistribution may push a neighbor over a
        # threshold, and a vetoed emptying cell resolves once the fill next to
        # it has completed.  Sweep until quiescent so the hysteresis band
        # holds at every step boundary.
        total = surface.ConversionReport()
        for _ in range(10):
            report = surface.convert_cells(self.f, self.flags, self.mass,
                                           self.geom, self.caches, self.conv,
                                           self.params.rho0)
            if not report.changed:
                break
            self._dirty = True
            total.filled += report.filled
            total.emptied += report.emptied
            total.repaired += report.repaired
            total.dropped_mass += report.dropped_mass
        self.last_report = total
        self.timestep += 1

    def fill_fractions(self) -> np.ndarray:
        """Fill fraction field with the wall marker, shaped like the grid."""
        return surface.fill_fraction_field(self.f, self.flags, self.mass,
                                           self.caches, self.geom)

    # -- seeding helpers ---------------------------------------------------

    def seed_equilibrium(self, rho: float | np.ndarray = 1.0,
                         velocity=(0.0, 0.0, 0.0)) -> None:
        """Set every cell's populations to equilibrium(rho, velocity)."""
        u = np.zeros((3,) + self.dims)
        for k in range(3):
            u[k] = velocity[k]
        self.f[:] = core.equilibrium(np.broadcast_to(np.asarray(rho, float),
                                                     self.dims), u)
        self.sync_mass()

    def sync_mass(self) -> None:
        """Reset mass from the current flags/populations: Liquid cells get
        their density, Interface cells keep mass, Gas and Wall get zero."""
        rho, _ = core.moments(self.f)
        liquid = self.flags == CellFlag.LIQUID
        self.mass[liquid] = rho[liquid]
        self.mass[(self.flags == CellFlag.GAS) | (self.flags == CellFlag.WALL)] = 0.0


def box_walls(sim: Simulation) -> None:
    """Flag all six domain faces as Wall (a closed basin)."""
    fl = sim.flags
    fl[0, :, :] = CellFlag.WALL
    fl[-1, :, :] = CellFlag.WALL
    fl[:, 0, :] = CellFlag.WALL
    fl[:, -1, :] = CellFlag.WALL
    fl[:, :, 0] = CellFlag.WALL
    fl[:, :, -1] = CellFlag.WALL
    sim.mark_flags_dirty()


def fill_water_box(sim: Simulation, lo: tuple[int, int, int],
                   hi: tuple[int, int, int]) -> None:
    """Flag a half-open box [lo, hi) as resting liquid with m = rho0.

    The caller is responsible for running `settle_surface` afterwards so
    liquid never touches gas directly.
    """
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    sim.flags[x0:x1, y0:y1, z0:z1] = CellFlag.LIQUID
    region = np.s_[:, x0:x1, y0:y1, z0:z1]
    sim.f[region] = core.equilibrium(
        np.full((x1 - x0, y1 - y0, z1 - z0), sim.params.rho0),
        np.zeros((3, x1 - x0, y1 - y0, z1 - z0)))
    sim.mass[x0:x1, y0:y1, z0:z1] = sim.params.rho0
    sim.mark_flags_dirty()


def settle_surface(sim: Simulation) -> None:
    """Convert Liquid cells that touch Gas into Interface cells.

    One sweep suffices: afterwards every remaining Liquid cell is shielded
    from Gas by the cells this sweep converted.  Mass and populations are
    kept, so a freshly loaded water box of k cells holds exactly k * rho0.
    """
    caches = sim.caches
    gas_neighbor = np.zeros(sim.geom.n, dtype=bool)
    for i in range(1, Q):
        gas_neighbor |= caches.nb_flags[i] == CellFlag.GAS
    flat = sim.flags.ravel()
    flat[(flat == CellFlag.LIQUID) & gas_neighbor] = CellFlag.INTERFACE
    sim.mark_flags_dirty()
