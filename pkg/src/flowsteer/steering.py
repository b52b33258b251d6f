"""Simulation lifecycle control and edit ingestion.

The driver owns the physics state plus a command queue.  Transport code (or
a replay script) submits protocol messages from any thread; the driver
applies them strictly between timesteps, so a snapshot at timestep t
reflects every command accepted before step t began and none after.
"""

from __future__ import annotations

import logging
import queue
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from . import lattice, protocol
from .core import CellFlag, FluidParams, StabilityFault
from .sim import Simulation

log = logging.getLogger(__name__)

DEFAULT_CADENCE = 4


class LifecycleState(Enum):
    IDLE = "idle"
    RUNNING = "running"
    PAUSED = "paused"
    FINISHED = "finished"


class CommandRejected(Exception):
    """A command that must not be applied; carries a wire error code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class SnapshotRequest:
    """Internal command: emit a fresh snapshot at the next boundary.

    Not a wire message.  The transport queues one when a client (re)connects
    so the first frame arrives immediately instead of at the next cadence
    tick; the sequence number advances like any other emission.
    """


def apply_edits(sim: Simulation,
                edits: Iterable[tuple[int, int, int, int]]) -> float:
    """Apply one cell-edit batch at a step boundary.

    Cells apply in listed order, last writer wins per cell.  Afterwards a
    repair pass restores the no-Liquid-next-to-Gas rule around the edits:
    gas neighbors of freshly placed liquid become resting interface cells,
    liquid neighbors of freshly emptied cells become interface keeping
    their state.  Placing a wall over water discards that water's mass (a
    deletion by the user, not a physics event); the discarded total is
    returned.

    Raises:
        CommandRejected: a coordinate is outside the grid or the action
            byte is unknown.  The grid is untouched in that case.
    """
    edits = list(edits)
    nx, ny, nz = sim.dims
    for x, y, z, action in edits:
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            raise CommandRejected(
                protocol.ERR_OUT_OF_BOUNDS,
                "cell (%d, %d, %d) outside %dx%dx%d grid" % (x, y, z, nx, ny, nz))
        if action not in (protocol.A_EMPTY, protocol.A_SET_WALL,
                          protocol.A_FILL_WATER):
            raise CommandRejected(protocol.ERR_BAD_PARAM,
                                  "unknown edit action %d" % action)

    rho0 = sim.params.rho0
    rest = lattice.W * rho0
    discarded = 0.0
    touched: list[tuple[int, int, int]] = []
    for x, y, z, action in edits:
        c = (x, y, z)
        if action == protocol.A_SET_WALL:
            if sim.flags[c] in (CellFlag.LIQUID, CellFlag.INTERFACE):
                discarded += float(sim.mass[c])
            sim.flags[c] = CellFlag.WALL
            sim.mass[c] = 0.0
            sim.f[(slice(None),) + c] = 0.0
        elif action == protocol.A_FILL_WATER:
            sim.flags[c] = CellFlag.LIQUID
            sim.mass[c] = rho0
            sim.f[(slice(None),) + c] = rest
        else:
            sim.flags[c] = CellFlag.GAS
            sim.mass[c] = 0.0
            sim.f[(slice(None),) + c] = 0.0
        touched.append(c)

    flat_flags = sim.flags.ravel()
    flat_mass = sim.mass.ravel()
    fv = sim.f.reshape(lattice.Q, -1)
    # fresh liquid first: a cell emptied in the same batch next to a fill
    # ends up interface via this pass and needs no liquid-side repair
    for c in touched:
        if sim.flags[c] != CellFlag.LIQUID:
            continue
        nbs = sim.geom.NB[1:, sim.geom.flat(*c)]
        gas_nbs = nbs[flat_flags[nbs] == CellFlag.GAS]
        flat_flags[gas_nbs] = CellFlag.INTERFACE
        flat_mass[gas_nbs] = 0.0
        fv[:, gas_nbs] = rest[:, None]
    for c in touched:
        if sim.flags[c] != CellFlag.GAS:
            continue
        nbs = sim.geom.NB[1:, sim.geom.flat(*c)]
        liq_nbs = nbs[flat_flags[nbs] == CellFlag.LIQUID]
        flat_flags[liq_nbs] = CellFlag.INTERFACE

    sim.mark_flags_dirty()
    if discarded:
        log.info("wall edits discarded %.6g units of liquid mass", discarded)
    return discarded


class SteeringDriver:
    """Owns a Simulation and serializes all mutation through one queue.

    Exactly one thread may call `run` / `iterate` / `pump`; any thread may
    call `submit`.  Replies (acks, errors, snapshots) go to `sink` as
    protocol message objects; the transport encodes them.
    """

    def __init__(self, make_sim: Callable[[], Simulation], *,
                 cadence: int = DEFAULT_CADENCE,
                 sink: Optional[Callable[[object], None]] = None,
                 detector: Optional[Callable[["SteeringDriver"], None]] = None):
        if cadence < 1:
            raise ValueError("cadence must be at least 1")
        self._make_sim = make_sim
        self.cadence = int(cadence)
        self.sink = sink or (lambda msg: None)
        self.detector = detector
        # set for restart mode: edits are only legal while not Running
        self.reject_edits_while_running = False
        # observer sees every accepted command; on_load fires after each
        # (re)load; scene_loader resolves LOAD_SCENE names to factories
        self.observer: Optional[Callable[[object], None]] = None
        self.on_load: Optional[Callable[[], None]] = None
        self.scene_loader: Optional[
            Callable[[str], Callable[[], Simulation]]] = None
        self._queue: "queue.Queue[object]" = queue.Queue()
        self._closed = False
        self.state = LifecycleState.IDLE
        self.seq = 0
        self.sim: Simulation
        self.load()

    # -- scene lifecycle ----------------------------------------------------

    def load(self, make_sim: Optional[Callable[[], Simulation]] = None) -> None:
        """(Re)build the simulation from its factory; lifecycle goes Idle.

        Pending commands are dropped and the sequence counter restarts, so
        a restart is indistinguishable from a fresh load.  A sequence-0
        snapshot of the initial state is emitted for the client to render
        before the run starts.
        """
        if make_sim is not None:
            self._make_sim = make_sim
        self.sim = self._make_sim()
        self.state = LifecycleState.IDLE
        self.seq = 0
        self._clear_queue()
        # hook first: a scene change must be announced before the first
        # snapshot of the new grid reaches any client
        if self.on_load is not None:
            self.on_load()
        self._emit_snapshot()

    def restart(self) -> None:
        self.load()

    def finish(self) -> None:
        """Scenario success: Running -> Finished."""
        if self.state is not LifecycleState.RUNNING:
            raise CommandRejected(protocol.ERR_ILLEGAL_TRANSITION,
                                  "finish while %s" % self.state.value)
        self.state = LifecycleState.FINISHED

    @property
    def timestep(self) -> int:
        return self.sim.timestep

    # -- command ingress ----------------------------------------------------

    def submit(self, msg: object) -> None:
        """Queue a protocol message; it applies at the next step boundary."""
        self._queue.put(msg)

    def _clear_queue(self) -> None:
        while True:
            try:
                self._queue.get_nowait()
            except queue.Empty:
                return

    def drain(self) -> None:
        """Apply every queued command at the current boundary without
        advancing time (scripted replay needs the two decoupled)."""
        while True:
            try:
                msg = self._queue.get_nowait()
            except queue.Empty:
                return
            self._handle(msg)

    def _handle(self, msg: object) -> None:
        try:
            if isinstance(msg, protocol.Control):
                self._control(msg.verb)
                self.sink(protocol.Ack(protocol.T_CONTROL))
            elif isinstance(msg, protocol.EditCells):
                if (self.reject_edits_while_running
                        and self.state is LifecycleState.RUNNING):
                    raise CommandRejected(
                        protocol.ERR_MODE_VIOLATION,
                        "edits while running are disabled in restart mode")
                apply_edits(self.sim, msg.edits)
                self.sink(protocol.Ack(protocol.T_EDIT_CELLS))
            elif isinstance(msg, protocol.SetParam):
                self._set_param(msg.target, msg.value)
                self.sink(protocol.Ack(protocol.T_SET_PARAM))
            elif isinstance(msg, protocol.SetCadence):
                if msg.cadence < 1:
                    raise CommandRejected(protocol.ERR_BAD_PARAM,
                                          "cadence must be at least 1")
                self.cadence = msg.cadence
                self.sink(protocol.Ack(protocol.T_SET_CADENCE))
            elif isinstance(msg, protocol.LoadScene):
                if self.scene_loader is None:
                    raise CommandRejected(protocol.ERR_BAD_SCENE,
                                          "no scene library configured")
                self.load(self.scene_loader(msg.name))
                self.sink(protocol.Ack(protocol.T_LOAD_SCENE))
            elif isinstance(msg, protocol.Telemetry):
                # client activity reports (camera moves): recorded by the
                # observer, deliberately unacknowledged at ~10 msgs/s
                pass
            elif isinstance(msg, SnapshotRequest):
                self.seq += 1
                self._emit_snapshot()
                return
            else:
                raise CommandRejected(protocol.ERR_UNKNOWN_TYPE,
                                      "unroutable message %r" % (msg,))
        except CommandRejected as exc:
            self.sink(protocol.Error(exc.code, str(exc)))
            return
        if self.observer is not None:
            self.observer(msg)

    def _control(self, verb: int) -> None:
        s = self.state
        if verb == protocol.V_START and s is LifecycleState.IDLE:
            self.state = LifecycleState.RUNNING
        elif verb == protocol.V_PAUSE and s is LifecycleState.RUNNING:
            self.state = LifecycleState.PAUSED
        elif verb == protocol.V_RESUME and s is LifecycleState.PAUSED:
            self.state = LifecycleState.RUNNING
        elif verb == protocol.V_STOP and s in (LifecycleState.RUNNING,
                                               LifecycleState.PAUSED):
            # stop halts the loop but keeps the state for inspection;
            # restart is the verb that reloads initial conditions
            self.state = LifecycleState.IDLE
        elif verb == protocol.V_RESTART:
            self.restart()
        elif verb == protocol.V_STEP and s in (LifecycleState.IDLE,
                                               LifecycleState.PAUSED):
            # single-step advances exactly one timestep and always shows
            # the result, regardless of cadence; lifecycle stays put
            self._step_once(force_snapshot=True)
        else:
            raise CommandRejected(
                protocol.ERR_ILLEGAL_TRANSITION,
                "control verb %d not legal while %s" % (verb, s.value))

    def _set_param(self, target: int, value: float) -> None:
        if target == protocol.P_CADENCE:
            c = int(round(value))
            if c < 1 or abs(value - c) > 1e-9:
                raise CommandRejected(protocol.ERR_BAD_PARAM,
                                      "cadence must be a positive integer")
            self.cadence = c
            return
        p = self.sim.params
        try:
            if target == protocol.P_TAU:
                new = FluidParams(tau=value, gravity=p.gravity, rho0=p.rho0,
                                  dx=p.dx, dt=p.dt)
            elif target in (protocol.P_GRAVITY_X, protocol.P_GRAVITY_Y,
                            protocol.P_GRAVITY_Z):
                g = list(p.gravity)
                g[target - protocol.P_GRAVITY_X] = value
                # dt is pinned at scene load; changing gravity mid-run must
                # not silently rescale the physical time mapping
                new = FluidParams(tau=p.tau, gravity=tuple(g), rho0=p.rho0,
                                  dx=p.dx, dt=p.dt)
            else:
                raise CommandRejected(protocol.ERR_BAD_PARAM,
                                      "unknown parameter target %d" % target)
        except ValueError as exc:
            raise CommandRejected(protocol.ERR_BAD_PARAM, str(exc))
        self.sim.params = new

    # -- stepping -----------------------------------------------------------

    def _emit_snapshot(self) -> None:
        eps = self.sim.fill_fractions()
        wall = self.sim.flags == CellFlag.WALL
        cells = protocol.quantize(eps, wall)
        self.sink(protocol.Snapshot(self.sim.timestep, self.seq, cells))

    def _step_once(self, force_snapshot: bool = False) -> bool:
        try:
            self.sim.step()
        except StabilityFault as exc:
            # pause instead of dying: the user can edit the offending
            # region, lower gravity or raise tau, then resume
            self.state = LifecycleState.PAUSED
            self.sink(protocol.Error(protocol.ERR_STABILITY_FAULT, str(exc)))
            return False
        if self.detector is not None:
            self.detector(self)
        if force_snapshot or self.sim.timestep % self.cadence == 0:
            self.seq += 1
            self._emit_snapshot()
        return True

    def iterate(self) -> bool:
        """One loop iteration: drain the queue, then step if Running.

        Returns whether a timestep was executed.
        """
        self.drain()
        if self.state is LifecycleState.RUNNING:
            return self._step_once()
        return False

    def pump(self, iterations: int = 1) -> None:
        """Run `iterations` loop iterations synchronously (for tests and
        scripted replay)."""
        for _ in range(iterations):
            self.iterate()

    def run(self) -> None:
        """Own the loop in the calling thread until `close` is called.

        While not Running the loop blocks on the command queue instead of
        spinning, so a paused simulation costs nothing.
        """
        while not self._closed:
            if self.state is LifecycleState.RUNNING:
                self.iterate()
            else:
                try:
                    msg = self._queue.get(timeout=0.05)
                except queue.Empty:
                    continue
                self._handle(msg)

    def close(self) -> None:
        self._closed = True
