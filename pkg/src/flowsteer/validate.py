"""Physics validation cases with analytic or conservation oracles.

Each case builds its own small system, runs it to the relevant regime and
reports a measured error against a fixed tolerance.  The same cases gate
releases; `flowsteer validate` exposes them from the command line.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import core, lattice
from .core import CellFlag, FluidParams
from .scenario import DetectorConfig, StabilizationTracker, max_active_speed
from .sim import Simulation, box_walls, fill_water_box, settle_surface


@dataclass(frozen=True)
class CaseResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str
    seconds: float

    def line(self) -> str:
        return "%-12s %-4s  measured %.3e vs tolerance %.0e  (%s, %.1fs)" % (
            self.name, "pass" if self.passed else "FAIL", self.measured,
            self.tolerance, self.detail, self.seconds)


def case_equilibrium() -> tuple[float, float, str]:
    """Uniform rest fluid on a fully periodic box is a fixed point."""
    dims = (16, 16, 16)
    params = FluidParams(tau=0.55, gravity=(0.0, 0.0, 0.0))
    flags = np.full(dims, CellFlag.LIQUID, dtype=np.uint8)
    geom = core.GridGeometry(dims)
    f = core.equilibrium(np.ones(dims), np.zeros((3,) + dims))
    before = f.copy()
    out = np.empty_like(f)
    no_walls = [np.empty(0, dtype=np.int64) for _ in range(lattice.Q)]
    for _ in range(100):
        core.collide(f, flags, params)
        core.stream(f, flags, out, geom, no_walls)
        f, out = out, f
    drift = float(np.max(np.abs(f - before)))
    return drift, 1e-14, "max population drift, 100 steps, periodic 16^3"


def case_mass() -> tuple[float, float, str]:
    """A closed-box dam break must conserve total liquid mass exactly."""
    # gentle gravity and a 12-cell column: collapse fronts shed droplets at
    # over three times the ballistic speed, and taller or heavier setups
    # graze the 0.3 stability guard
    sim = Simulation((24, 24, 24), FluidParams(tau=0.55,
                                               gravity=(0.0, 0.0, -2.5e-4)))
    box_walls(sim)
    fill_water_box(sim, (1, 1, 1), (12, 23, 13))
    settle_surface(sim)
    total0 = sim.total_mass()
    for _ in range(10_000):
        sim.step()
    drift = abs(sim.total_mass() - total0) / total0
    return drift, 1e-9, "relative mass drift, 10,000 steps, 24^3 dam break"


def case_poiseuille() -> tuple[float, float, str]:
    """Body-force channel flow converges to the parabolic profile."""
    ny = 34  # 32 fluid cells between the plates
    g = 1e-5
    tau = 0.8
    sim = Simulation((4, ny, 4), FluidParams(tau=tau, gravity=(g, 0.0, 0.0)))
    sim.flags[:] = CellFlag.LIQUID
    sim.flags[:, 0, :] = CellFlag.WALL
    sim.flags[:, ny - 1, :] = CellFlag.WALL
    sim.seed_equilibrium(1.0)
    sim.sync_mass()
    for _ in range(8000):
        sim.step()
    u = core.moments(sim.f).u[0, 2, 1:-1, 2]
    y = np.arange(ny - 2) + 0.5
    H = float(ny - 2)
    nu = (tau - 0.5) / 3.0
    analytic = (g / (2 * nu)) * y * (H - y)
    err = float(np.linalg.norm(u - analytic) / np.linalg.norm(analytic))
    return err, 0.02, "relative L2 error vs (g/2nu) y (H - y), 32 cells"


def case_hydrostatic() -> tuple[float, float, str]:
    """A resting pool settles and carries a linear density profile."""
    sim = Simulation((16, 16, 32), FluidParams(tau=0.55,
                                               gravity=(0.0, 0.0, -5e-4)))
    box_walls(sim)
    fill_water_box(sim, (1, 1, 1), (15, 15, 25))
    settle_surface(sim)
    tracker = StabilizationTracker(DetectorConfig())
    settled_at = 0
    for _ in range(10_000):
        sim.step()
        if tracker.update(max_active_speed(sim)):
            settled_at = sim.timestep
            break
    if not settled_at:
        return float("inf"), 0.01, "never stabilized within 10,000 steps"
    # column-averaged density over fully liquid layers vs a straight line
    rho = core.moments(sim.f).rho
    liquid_layers = [z for z in range(1, 25)
                     if np.all(sim.flags[1:15, 1:15, z] == CellFlag.LIQUID)]
    z = np.asarray(liquid_layers, dtype=float)
    profile = np.array([rho[1:15, 1:15, zz].mean() for zz in liquid_layers])
    slope, intercept = np.polyfit(z, profile, 1)
    residual = profile - (slope * z + intercept)
    err = float(np.max(np.abs(residual)) / (profile.max() - profile.min()))
    return err, 0.01, ("max linear-fit residual over the density range, "
                       "settled at step %d" % settled_at)


def case_symmetry() -> tuple[float, float, str]:
    """A mirror-symmetric dam break must stay bitwise mirror-symmetric."""
    sim = Simulation((24, 24, 24), FluidParams(tau=0.55,
                                               gravity=(0.0, 0.0, -5e-4)))
    box_walls(sim)
    fill_water_box(sim, (6, 1, 1), (18, 11, 16))  # centered in x
    settle_surface(sim)
    for _ in range(500):
        sim.step()
    eps = sim.fill_fractions()
    diff = float(np.max(np.abs(eps - eps[::-1, :, :])))
    return diff, 1e-9, "max mirrored fill-fraction difference, 500 steps"


CASES: dict[str, Callable[[], tuple[float, float, str]]] = {
    "equilibrium": case_equilibrium,
    "mass": case_mass,
    "poiseuille": case_poiseuille,
    "hydrostatic": case_hydrostatic,
    "symmetry": case_symmetry,
}


def run_case(name: str) -> CaseResult:
    if name not in CASES:
        raise KeyError("unknown validation case %r (have: %s)"
                       % (name, ", ".join(sorted(CASES))))
    t0 = time.perf_counter()
    measured, tolerance, detail = CASES[name]()
    dt = time.perf_counter() - t0
    return CaseResult(name=name, passed=measured < tolerance,
                      measured=measured, tolerance=tolerance,
                      detail=detail, seconds=dt)


def run_validation(names: Optional[list[str]] = None) -> list[CaseResult]:
    return [run_case(n) for n in (names or list(CASES))]
