"""Headless scripted sessions: deterministic reproduction of steered runs.

A replay drives the same driver/runtime pair the live server uses, but
commands come from a text script instead of a socket and the event-log
clock is simulated time (timestep * dt), so two replays of one script are
byte-identical: same events, same snapshot bytes, same metrics.

Script grammar, one action per line, `#` comments:

    at <step|+seconds> start|pause|resume|stop|restart|step
    at <step|+seconds> edit <x> <y> <z> empty|wall|fill
    at <step|+seconds> param tau|gx|gy|gz|cadence <value>

`at 120` means the action applies at the step boundary once 120 timesteps
have run; `at +1.5` means 1.5 simulated seconds after the previous action.
Steps must be non-decreasing.  Consecutive `edit` lines with the same step
merge into one atomic batch.  While the clock is not advancing (before
start, during pause, after stop or finish), the next action fires at the
next boundary regardless of its step, because its step can never arrive.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import protocol
from .scenario import (Metrics, IncompleteLog, LogRecord, SceneSpec,
                       ScenarioRuntime, compute_metrics, scene_sim_factory)
from .steering import DEFAULT_CADENCE, LifecycleState, SteeringDriver

VERBS = {"start": protocol.V_START, "pause": protocol.V_PAUSE,
         "resume": protocol.V_RESUME, "stop": protocol.V_STOP,
         "restart": protocol.V_RESTART, "step": protocol.V_STEP}
ACTIONS = {"empty": protocol.A_EMPTY, "wall": protocol.A_SET_WALL,
           "fill": protocol.A_FILL_WATER}
PARAMS = {"tau": protocol.P_TAU, "gx": protocol.P_GRAVITY_X,
          "gy": protocol.P_GRAVITY_Y, "gz": protocol.P_GRAVITY_Z,
          "cadence": protocol.P_CADENCE}


class ScriptError(ValueError):
    """Script text is invalid; the message carries the line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__("line %d: %s" % (line_no, message))
        self.line_no = line_no


@dataclass(frozen=True)
class ScriptAction:
    step: int
    message: object
    line_no: int


def parse_script(text: str, spec: SceneSpec) -> list[ScriptAction]:
    """Parse and validate a script against one scene.

    Coordinates are checked against the scene dims here so a mismatched
    script fails before any stepping, with the offending line number.
    """
    dt = spec.params().dt
    nx, ny, nz = spec.dims
    actions: list[ScriptAction] = []
    prev_step = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] != "at" or len(tok) < 3:
            raise ScriptError(line_no, "expected `at <step> <action>`")
        when = tok[1]
        try:
            if when.startswith("+"):
                step = prev_step + max(0, round(float(when[1:]) / dt))
            else:
                step = int(when)
        except ValueError:
            raise ScriptError(line_no, "bad step %r" % when)
        if step < prev_step:
            raise ScriptError(line_no, "step %d goes backwards (previous %d)"
                              % (step, prev_step))
        prev_step = step

        kind, args = tok[2], tok[3:]
        if kind in VERBS:
            if args:
                raise ScriptError(line_no, "control verb takes no arguments")
            msg: object = protocol.Control(VERBS[kind])
        elif kind == "edit":
            if len(args) != 4:
                raise ScriptError(line_no, "expected `edit x y z action`")
            try:
                x, y, z = (int(v) for v in args[:3])
            except ValueError:
                raise ScriptError(line_no, "bad coordinates %r" % (args[:3],))
            act = ACTIONS.get(args[3])
            if act is None:
                raise ScriptError(line_no, "unknown edit action %r (want %s)"
                                  % (args[3], "/".join(ACTIONS)))
            if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
                raise ScriptError(line_no,
                                  "cell (%d, %d, %d) outside the %dx%dx%d "
                                  "scene" % (x, y, z, nx, ny, nz))
            msg = protocol.EditCells(((x, y, z, act),))
        elif kind == "param":
            if len(args) != 2:
                raise ScriptError(line_no, "expected `param target value`")
            target = PARAMS.get(args[0])
            if target is None:
                raise ScriptError(line_no, "unknown parameter %r (want %s)"
                                  % (args[0], "/".join(PARAMS)))
            try:
                value = float(args[1])
            except ValueError:
                raise ScriptError(line_no, "bad value %r" % args[1])
            msg = protocol.SetParam(target, value)
        else:
            raise ScriptError(line_no, "unknown action %r" % kind)

        # same-step edits form one atomic batch, like one mouse stroke
        if (actions and isinstance(msg, protocol.EditCells)
                and isinstance(actions[-1].message, protocol.EditCells)
                and actions[-1].step == step):
            merged = protocol.EditCells(actions[-1].message.edits + msg.edits)
            actions[-1] = ScriptAction(step, merged, actions[-1].line_no)
        else:
            actions.append(ScriptAction(step, msg, line_no))
    return actions


def load_script(path: Path | str, spec: SceneSpec) -> list[ScriptAction]:
    return parse_script(Path(path).read_text(), spec)


@dataclass
class ReplayResult:
    records: list[LogRecord]
    metrics: Optional[Metrics]
    incomplete: Optional[str]
    snapshot_digest: str
    snapshots_written: int
    timestep: int
    final_state: LifecycleState
    faults: list[protocol.Error] = field(default_factory=list)

    def summary(self) -> str:
        lines = ["replayed to timestep %d (%s), %d log records"
                 % (self.timestep, self.final_state.value, len(self.records))]
        if self.snapshots_written:
            lines.append("wrote %d snapshot frames" % self.snapshots_written)
        lines.append("snapshot stream sha256 %s" % self.snapshot_digest)
        for err in self.faults:
            lines.append("fault: code %d, %s" % (err.code, err.message))
        if self.metrics is not None:
            m = self.metrics
            lines.append("metrics: tct %.3f s, failures %d, "
                         "observation time %.3f s"
                         % (m.tct, m.failures, m.observation_time))
        else:
            lines.append("metrics incomplete: %s" % self.incomplete)
        return "\n".join(lines)


def run_replay(spec: SceneSpec, actions: list[ScriptAction], *,
               total_steps: int, cadence: int = DEFAULT_CADENCE,
               mode: str = "interactive",
               out_dir: Optional[Path | str] = None,
               scene_dir: Optional[Path | str] = None) -> ReplayResult:
    """Run a parsed script against a scene for at most `total_steps`.

    With `out_dir`, writes `events.log` plus one `snapshots/NNNNNN.bin`
    file per emitted snapshot containing the complete wire frame, so any
    protocol decoder can read the dumps.  The digest in the result covers
    the same bytes whether or not they are written.
    """
    out = Path(out_dir) if out_dir is not None else None
    snap_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)

    digest = hashlib.sha256()
    written = 0
    faults: list[protocol.Error] = []

    def sink(msg: object) -> None:
        nonlocal written
        if isinstance(msg, protocol.Snapshot):
            frame = protocol.encode(msg)
            digest.update(frame)
            if snap_dir is not None:
                (snap_dir / ("%06d.bin" % msg.seq)).write_bytes(frame)
                written += 1
        elif isinstance(msg, protocol.Error):
            faults.append(msg)

    dt = spec.params().dt
    driver = SteeringDriver(scene_sim_factory(spec), cadence=cadence,
                            sink=sink)
    driver.reject_edits_while_running = (mode == "restart")
    runtime = ScenarioRuntime(
        spec, driver, scene_dir=scene_dir,
        log_path=None if out is None else out / "events.log",
        clock=lambda: driver.timestep * dt)

    pending = deque(actions)
    while True:
        # everything whose step has arrived fires as one boundary batch
        fired = False
        while pending and pending[0].step <= driver.timestep:
            driver.submit(pending.popleft().message)
            fired = True
        if fired:
            driver.drain()
            continue
        if driver.state is not LifecycleState.RUNNING:
            if not pending:
                break
            # clock frozen: the head action's step can never arrive, so it
            # fires now; one at a time, because it may unfreeze the clock
            # and restore meaning to the steps that follow
            driver.submit(pending.popleft().message)
            driver.drain()
            continue
        if driver.timestep >= total_steps:
            # running, but the budget is spent; anything still pending is
            # beyond the budget by definition
            break
        driver.iterate()

    runtime.log.close()
    records = list(runtime.log.records)
    metrics: Optional[Metrics] = None
    incomplete: Optional[str] = None
    try:
        metrics = compute_metrics(records)
    except IncompleteLog as exc:
        incomplete = str(exc)
    return ReplayResult(records=records, metrics=metrics,
                        incomplete=incomplete,
                        snapshot_digest=digest.hexdigest(),
                        snapshots_written=written,
                        timestep=driver.timestep,
                        final_state=driver.state, faults=faults)


def strip_clock(records: list[LogRecord]) -> list[tuple[int, str, str]]:
    """Project away the wall-clock column for serve-vs-replay comparison."""
    return [(r.timestep, r.event, r.details) for r in records]
