"""Free-surface layer: mass tracking, gas-side reconstruction, conversions.

Every cell carries a liquid mass m alongside the populations.  Liquid cells
keep m equal to their density (the pairwise exchange below reproduces the
streaming mass flux exactly when one side of a pair is Liquid), Interface
cells carry a partial fill m = eps * rho, Gas and Wall cells carry zero.

Mass moves only through the pairwise exchange rule, which is antisymmetric
by construction, so the sum of m over the grid is invariant under collision
and streaming and changes only through explicit edits.  Conversion between
flags redistributes any surplus exactly, keeping the invariant.

The exchange factor for a pair is 1 when either cell is Liquid and the
average fill fraction when both are Interface.  The factor must be a
property of the pair, not of one endpoint, or the two sides would book
different amounts and conservation would be lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CellFlag, FluidParams, GridGeometry, equilibrium
from .lattice import C, OPP, Q, W, X_PAIRS, X_ZERO

ATMOSPHERIC_RHO = 1.0     # gas-side density used by the reconstruction closure
WALL_MARKER = -1.0        # fill_fraction_field value for Wall cells


@dataclass(frozen=True)
class ConversionConfig:
    """Hysteresis band for Interface conversions.

    An Interface cell becomes Liquid when m > (1 + kappa) * rho and Gas when
    m < -kappa * rho; the band keeps cells from oscillating between states
    on round-off sized overshoots.
    """

    kappa: float = 1e-3


class FlagCaches:
    """Neighbor tables derived from the flag field.

    Rebuilt whenever any flag changes (conversions, edits, scene loads).
    Rows are indexed by direction; NB[i] addresses the neighbor at +c_i, so
    the pull source of direction i is the neighbor along OPP[i].
    """

    def __init__(self, flags: np.ndarray, geom: GridGeometry):
        flat = flags.ravel()
        self.liquid = flat == CellFlag.LIQUID
        self.interface = flat == CellFlag.INTERFACE
        self.gas = flat == CellFlag.GAS
        self.wall = flat == CellFlag.WALL
        self.active = self.liquid | self.interface
        self.active_f = self.active.astype(np.float64)
        self.interface_idx = np.flatnonzero(self.interface)
        nbf = flat[geom.NB]                      # (19, n): flag at x + c_i
        self.nb_flags = nbf
        self.nb_liquid = nbf == CellFlag.LIQUID
        self.nb_active = self.nb_liquid | (nbf == CellFlag.INTERFACE)
        self.wall_src = [np.empty(0, dtype=np.int64)] * Q
        self.gas_src = [np.empty(0, dtype=np.int64)] * Q
        for i in range(1, Q):
            src_flags = nbf[OPP[i]]
            self.wall_src[i] = np.flatnonzero(self.active & (src_flags == CellFlag.WALL))
            self.gas_src[i] = np.flatnonzero(self.interface & (src_flags == CellFlag.GAS))


def unclamped_fill(flat_flags_caches: FlagCaches, mass: np.ndarray,
                   rho: np.ndarray) -> np.ndarray:
    """Raw eps used by the exchange factor: 1 for Liquid, m/rho for Interface.

    No clamping: pre-conversion overshoots just outside [0, 1] must enter
    the pair factor symmetrically on both sides or conservation breaks.
    """
    c = flat_flags_caches
    eps = np.zeros_like(mass)
    eps[c.liquid] = 1.0
    idx = c.interface_idx
    r = rho[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        eps[idx] = np.where(r > 0, mass[idx] / np.where(r > 0, r, 1.0), 0.0)
    return eps


def exchange_mass(f: np.ndarray, caches: FlagCaches, eps: np.ndarray,
                  geom: GridGeometry) -> np.ndarray:
    """Per-cell mass change from one streaming step.

    dm_i(x) = s * (f_opp(i)(x + c_i) - f_i(x)) summed over directions, where
    s is the pair factor described in the module docstring.  `f` must hold
    the post-collision, pre-stream populations: those are the values that
    cross the cell faces during the streaming that was just performed.

    Returns a flat (n,) array; zero on Gas and Wall cells.  The sum over
    the grid is zero to round-off because every pair contributes equal and
    opposite amounts.
    """
    fv = f.reshape(Q, -1)
    terms: list[np.ndarray] = [None] * Q  # type: ignore[list-item]
    for i in range(1, Q):
        nb = geom.NB[i]
        fin = fv[OPP[i]][nb]
        diff = fin - fv[i]
        s = np.where(caches.liquid | caches.nb_liquid[i], 1.0, 0.5 * (eps + eps[nb]))
        s = np.where(caches.active & caches.nb_active[i], s, 0.0)
        terms[i] = s * diff
    dm = terms[1] + terms[2]
    for a, b in X_PAIRS[1:]:
        dm += terms[a] + terms[b]
    for i in X_ZERO:
        dm += terms[i]
    return dm


def reconstruct_from_gas(f_post: np.ndarray, out: np.ndarray, u: np.ndarray,
                         caches: FlagCaches) -> None:
    """Fill populations that would have streamed out of Gas cells.

    For an Interface cell whose pull source along direction i is Gas, the
    incoming population is closed with the atmosphere:

        f_i(x, t+1) = f_i^eq(rho_A, u) + f_opp(i)^eq(rho_A, u) - f_opp(i)(x, t)

    where u is the cell's current velocity and f_opp(i)(x, t) is the
    post-collision population about to leave toward the gas.  The paired
    equilibria collapse to 2 w_i rho_A (1 - 1.5 u^2 + 4.5 (c_i.u)^2).
    Writes into `out` (the post-stream buffer) at the affected slots only.
    """
    fv = f_post.reshape(Q, -1)
    ov = out.reshape(Q, -1)
    ux, uy, uz = (u[k].ravel() for k in range(3))
    for i in range(1, Q):
        idx = caches.gas_src[i]
        if not len(idx):
            continue
        gx, gy, gz = ux[idx], uy[idx], uz[idx]
        cu = None
        for comp, vec in ((int(C[i, 0]), gx), (int(C[i, 1]), gy), (int(C[i, 2]), gz)):
            if comp:
                part = vec if comp == 1 else -vec
                cu = part if cu is None else cu + part
        usq = gx * gx + gy * gy + gz * gz
        eq_pair = (2.0 * W[i] * ATMOSPHERIC_RHO) * (1.0 - 1.5 * usq + 4.5 * cu * cu)
        ov[i, idx] = eq_pair - fv[OPP[i], idx]


def fill_fraction_field(f: np.ndarray, flags: np.ndarray, mass: np.ndarray,
                        caches: FlagCaches | None = None,
                        geom: GridGeometry | None = None) -> np.ndarray:
    """Fill fraction per cell: Liquid 1, Gas 0, Interface m/rho clamped to
    [0, 1], Wall cells the WALL_MARKER sentinel."""
    if geom is None:
        geom = GridGeometry(flags.shape)
    if caches is None:
        caches = FlagCaches(flags, geom)
    fv = f.reshape(Q, -1)
    eps = np.zeros(geom.n, dtype=np.float64)
    eps[caches.liquid] = 1.0
    eps[caches.wall] = WALL_MARKER
    idx = caches.interface_idx
    if len(idx):
        rho = _grouped_density(fv[:, idx])
        safe = rho > 0
        eps[idx] = np.clip(
            np.where(safe, mass.ravel()[idx] / np.where(safe, rho, 1.0), 0.0), 0.0, 1.0
        )
    return eps.reshape(flags.shape)


def _grouped_density(cols: np.ndarray) -> np.ndarray:
    """Density of a (19, k) population slice with mirror-safe pair grouping."""
    rho = cols[1] + cols[2]
    for a, b in X_PAIRS[1:]:
        rho += cols[a] + cols[b]
    rho += cols[0]
    for i in X_ZERO:
        rho += cols[i]
    return rho


def _grouped_momentum(cols: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mx = (cols[1] - cols[2]) + (cols[3] - cols[4]) + (cols[5] - cols[6]) \
        + (cols[7] - cols[8]) + (cols[9] - cols[10])
    my = ((cols[3] + cols[4]) - (cols[5] + cols[6])) + (cols[11] - cols[12]) \
        + (cols[15] - cols[16]) + (cols[17] - cols[18])
    mz = ((cols[7] + cols[8]) - (cols[9] + cols[10])) + (cols[13] - cols[14]) \
        + ((cols[15] - cols[16]) - (cols[17] - cols[18]))
    return mx, my, mz


@dataclass
class ConversionReport:
    filled: int = 0
    emptied: int = 0
    repaired: int = 0
    dropped_mass: float = 0.0

    @property
    def changed(self) -> bool:
        return bool(self.filled or self.emptied or self.repaired)


def convert_cells(f: np.ndarray, flags: np.ndarray, mass: np.ndarray,
                  geom: GridGeometry, caches: FlagCaches,
                  conv: ConversionConfig, rho0: float = 1.0) -> ConversionReport:
    """Flag conversion sweep: thresholds, invariant repair, redistribution.

    Interface cells cross to Liquid above (1 + kappa) rho and to Gas below
    -kappa rho.  An emptying candidate adjacent to a filling cell stays
    Interface this step (the fill wins, keeping the surface closed).
    Interface cells whose connected component touches neither Liquid nor
    Wall are swept to Gas regardless of mass: such a group has no partner
    that could ever change its fill, no wall bounce-back to bleed off its
    momentum, and under forcing its speed grows by |g| every step until
    the stability guard trips.  Wall contact anywhere in the component
    exempts it (a droplet stuck to a wall is a legitimate steady state,
    pinned by bounce-back); cells past the fill threshold are exempt too,
    they convert to Liquid and the repair wraps them into a live droplet.

    Repair restores the no-Liquid-next-to-Gas invariant: Gas neighbors of
    fresh Liquid become Interface initialized at the equilibrium of the
    averaged (rho, u) of their fluid neighbors (frozen before any repair
    write, so the sweep order cannot leak into the result); Liquid
    neighbors of fresh Gas become Interface keeping their state.

    Surplus mass of each converted cell is split equally among its
    post-repair Interface neighbors, falling back to the nearest Liquid
    cell, and is dropped only when neither exists (total evaporation).
    Apart from that last pathological case the grid total is unchanged to
    round-off.
    """
    fv = f.reshape(Q, -1)
    flat_flags = flags.ravel()
    flat_mass = mass.ravel()
    report = ConversionReport()

    idx = caches.interface_idx
    if not len(idx):
        return report
    rho_i = _grouped_density(fv[:, idx])
    m_i = flat_mass[idx]
    ok = rho_i > 0
    fill = idx[ok & (m_i > (1.0 + conv.kappa) * rho_i)]
    empty_thresh = idx[ok & (m_i < -conv.kappa * rho_i)]
    nbf = caches.nb_flags[1:, idx]
    backed = ((nbf == CellFlag.LIQUID) | (nbf == CellFlag.WALL)).any(axis=0)
    cand = idx[~backed]
    stranded = _stranded_interface(cand, caches, geom) if len(cand) else cand
    # a cell past the fill threshold fills even when stranded (repair wraps it)
    empty = np.setdiff1d(np.union1d(empty_thresh, stranded), fill)

    if len(fill) and len(empty):
        # an emptying cell adjacent to a filling one stays interface
        is_fill = np.zeros(geom.n, dtype=bool)
        is_fill[fill] = True
        keep = np.ones(len(empty), dtype=bool)
        for i in range(1, Q):
            keep &= ~is_fill[geom.NB[i][empty]]
        empty = empty[keep]
    if not (len(fill) or len(empty)):
        return report

    rho_fill = rho_i[np.searchsorted(idx, fill)]  # idx is sorted, fill is a subset
    flat_flags[fill] = CellFlag.LIQUID
    flat_flags[empty] = CellFlag.GAS
    report.filled = len(fill)
    report.emptied = len(empty)

    # repair targets, computed against the post-threshold flag state
    to_interface_from_gas: list[int] = []
    to_interface_from_liquid: list[int] = []
    for c in fill.tolist():
        for i in range(1, Q):
            nb = int(geom.NB[i][c])
            if flat_flags[nb] == CellFlag.GAS:
                to_interface_from_gas.append(nb)
    for c in empty.tolist():
        for i in range(1, Q):
            nb = int(geom.NB[i][c])
            if flat_flags[nb] == CellFlag.LIQUID:
                to_interface_from_liquid.append(nb)
    to_interface_from_gas = sorted(set(to_interface_from_gas))
    to_interface_from_liquid = sorted(set(to_interface_from_liquid))

    # init values for gas-born interface cells, from the frozen pre-repair state
    inits: list[tuple[int, np.ndarray]] = []
    for g in to_interface_from_gas:
        nbs = [int(geom.NB[i][g]) for i in range(1, Q)]
        contrib = [n for n in nbs
                   if flat_flags[n] in (CellFlag.LIQUID, CellFlag.INTERFACE)]
        if contrib:
            cols = fv[:, contrib]
            rho_n = _grouped_density(cols)
            mx, my, mz = _grouped_momentum(cols)
            rho_avg = float(rho_n.sum()) / len(contrib)
            if rho_avg > 0:
                uavg = np.array([mx.sum(), my.sum(), mz.sum()]) / rho_n.sum()
            else:
                rho_avg, uavg = rho0, np.zeros(3)
        else:
            rho_avg, uavg = rho0, np.zeros(3)
        inits.append((g, equilibrium(rho_avg, uavg)))
    for g, feq in inits:
        fv[:, g] = feq
        flat_mass[g] = 0.0
        flat_flags[g] = CellFlag.INTERFACE
    for c in to_interface_from_liquid:
        flat_flags[c] = CellFlag.INTERFACE
    report.repaired = len(to_interface_from_gas) + len(to_interface_from_liquid)

    # redistribute surplus so the grid total is unchanged
    liquid_pool: np.ndarray | None = None
    for c, r in zip(fill.tolist(), rho_fill.tolist()):
        surplus = flat_mass[c] - r
        flat_mass[c] = r
        liquid_pool = _give_back(c, surplus, flat_flags, flat_mass, geom,
                                 liquid_pool, report)
    for c in empty.tolist():
        surplus = flat_mass[c]
        flat_mass[c] = 0.0
        liquid_pool = _give_back(c, surplus, flat_flags, flat_mass, geom,
                                 liquid_pool, report)
    return report


def _stranded_interface(cand: np.ndarray, caches: FlagCaches,
                        geom: GridGeometry) -> np.ndarray:
    """Subset of `cand` with no Interface path to any liquid- or wall-backed cell.

    `cand` holds the Interface cells that touch neither Liquid nor Wall
    directly.  A cell survives if some chain of Interface neighbors reaches
    an Interface cell outside `cand`: mass can drain along the chain and the
    anchor's contact bounds the momentum of the whole group.  The remainder
    are components in free fall, doomed to trip the stability guard.

    The fill starts from the anchored rim and grows inward, so the cost
    scales with the unbacked cells only; settled surfaces, where every
    Interface cell sits on liquid, skip it entirely.
    """
    in_cand = np.zeros(geom.n, dtype=bool)
    in_cand[cand] = True
    anchored = ((caches.nb_flags[1:, cand] == CellFlag.INTERFACE)
                & ~in_cand[geom.NB[1:, cand]]).any(axis=0)
    reached = np.zeros(geom.n, dtype=bool)
    frontier = cand[anchored]
    reached[frontier] = True
    while len(frontier):
        hops = geom.NB[1:, frontier].ravel()
        hops = hops[in_cand[hops] & ~reached[hops]]
        if not len(hops):
            break
        frontier = np.unique(hops)
        reached[frontier] = True
    return cand[~reached[cand]]


def _give_back(c: int, surplus: float, flat_flags, flat_mass,
               geom: GridGeometry, liquid_pool, report: ConversionReport):
    """Hand `surplus` to interface neighbors of c, else the nearest liquid."""
    if surplus == 0.0:
        return liquid_pool
    targets = [int(geom.NB[i][c]) for i in range(1, Q)]
    targets = [t for t in targets if flat_flags[t] == CellFlag.INTERFACE]
    if targets:
        share = surplus / len(targets)
        for t in targets:
            flat_mass[t] += share
        return liquid_pool
    if liquid_pool is None:
        liquid_pool = np.flatnonzero(flat_flags == CellFlag.LIQUID)
    pool = liquid_pool[liquid_pool != c]  # the donor cannot receive its own surplus
    if len(pool):
        nx, ny, nz = geom.dims
        cz = c % nz
        cy = (c // nz) % ny
        cx = c // (ny * nz)
        px = pool // (ny * nz)
        py = (pool // nz) % ny
        pz = pool % nz
        d2 = (px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2
        # share ties equally: an index-order tiebreak would break mirror symmetry
        nearest = pool[d2 == d2.min()]
        share = surplus / len(nearest)
        for t in nearest.tolist():
            flat_mass[t] += share
        return liquid_pool
    report.dropped_mass += surplus
    return liquid_pool
