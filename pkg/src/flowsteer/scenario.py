"""Dam-design scenarios: scene files, failure detectors, outcome logic,
event logging and session metrics.

A scene drops a column of water into a closed basin.  The player raises a
wall inside a fixed footprint; water reaching the protected region behind
it is an overflow failure, a wall taller than the scene's optimal height
is an over-built failure, and hitting the optimal height exactly wins the
scene once the fluid has settled.  The optimal height is not a guess: it
is computed by sweeping wall heights offline and stored in the scene file,
and `verify_optimal_height` re-runs that sweep.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import protocol
from .core import CellFlag, FluidParams
from .sim import Simulation, box_walls, fill_water_box, settle_surface
from .steering import CommandRejected, SteeringDriver

PACKAGED_SCENE_DIR = Path(__file__).parent / "scenes"

VERB_NAMES = {
    protocol.V_START: "start",
    protocol.V_PAUSE: "pause",
    protocol.V_RESUME: "resume",
    protocol.V_STOP: "stop",
    protocol.V_RESTART: "restart",
    protocol.V_STEP: "step",
}


class InvalidScene(ValueError):
    """Scene file violates the schema; message names the offending field."""


class InconsistentScene(Exception):
    """The stored optimal height disagrees with the offline sweep."""


class IncompleteLog(Exception):
    """Metrics requested from a log without a success event.

    Carries the computable part: `failures` and `observation_time`.
    """

    def __init__(self, message: str, failures: int, observation_time: float):
        super().__init__(message)
        self.failures = failures
        self.observation_time = observation_time


class Outcome(Enum):
    OVERFLOW = "overflow"
    OVERBUILT = "overbuilt"
    SUCCESS = "success"


# ---------------------------------------------------------------- scene spec

@dataclass(frozen=True)
class Box:
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(int(v) for v in self.hi))

    def overlaps(self, other: "Box") -> bool:
        return all(a0 < b1 and b0 < a1 for a0, a1, b0, b1
                   in zip(self.lo, self.hi, other.lo, other.hi))

    def inside(self, dims: tuple[int, int, int]) -> bool:
        return all(0 <= lo < hi <= d for lo, hi, d
                   in zip(self.lo, self.hi, dims))

    def volume(self) -> int:
        return int(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class WallRegion:
    """Buildable wall footprint: x/y cell ranges, growing upward from
    `base` to at most `max_height` cells."""
    x: tuple[int, int]
    y: tuple[int, int]
    base: int
    max_height: int
    initial_height: int = 0

    def volume_box(self) -> Box:
        return Box((self.x[0], self.y[0], self.base),
                   (self.x[1], self.y[1], self.base + self.max_height))


@dataclass(frozen=True)
class DetectorConfig:
    overflow_eps: float = 0.5
    stabilization_speed: float = 1e-3
    stabilization_window: int = 200

    def __post_init__(self):
        if self.overflow_eps <= 0 or self.stabilization_speed <= 0:
            raise InvalidScene("detectors: thresholds must be positive")
        if self.stabilization_window < 1:
            raise InvalidScene("detectors: stabilization_window must be >= 1")


@dataclass(frozen=True)
class SceneSpec:
    name: str
    dims: tuple[int, int, int]
    dx: float
    tau: float
    gravity: tuple[float, float, float]
    water: tuple[Box, ...]
    obstacles: tuple[Box, ...]
    wall: WallRegion
    protected: Box
    optimal_height: int
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    next_scene: Optional[str] = None
    notes: str = ""

    def params(self) -> FluidParams:
        return FluidParams(tau=self.tau, gravity=self.gravity, dx=self.dx)

    def validate(self) -> None:
        nx, ny, nz = self.dims
        if min(self.dims) < 3:
            raise InvalidScene("dims: every axis needs at least 3 cells")
        if self.dx <= 0:
            raise InvalidScene("dx: must be positive")
        interior = (1, 1, 1), (nx - 1, ny - 1, nz - 1)
        for label, boxes in (("water", self.water), ("obstacles", self.obstacles)):
            for i, b in enumerate(boxes):
                if not b.inside(self.dims):
                    raise InvalidScene("%s[%d]: box %s..%s leaves the grid"
                                       % (label, i, b.lo, b.hi))
        for i, b in enumerate(self.water):
            if not b.inside((nx - 1, ny - 1, nz - 1)) or min(b.lo) < 1:
                raise InvalidScene(
                    "water[%d]: must stay inside the interior (the domain "
                    "faces are walls)" % i)
        w = self.wall
        if not (0 < w.x[0] < w.x[1] <= nx - 1
                and 0 < w.y[0] < w.y[1] <= ny - 1):
            raise InvalidScene("wall: footprint outside the interior")
        if w.base < 1 or w.base + w.max_height > nz - 1:
            raise InvalidScene("wall: height range leaves the interior")
        if not 0 <= w.initial_height <= w.max_height:
            raise InvalidScene("wall: initial_height outside [0, max_height]")
        if not 0 < self.optimal_height <= w.max_height:
            raise InvalidScene("optimal_height: must be in (0, max_height]")
        if not self.protected.inside((nx - 1, ny - 1, nz - 1)) \
                or min(self.protected.lo) < 1:
            raise InvalidScene("protected: must stay inside the interior")

        regions = ([("water[%d]" % i, b) for i, b in enumerate(self.water)]
                   + [("obstacles[%d]" % i, b)
                      for i, b in enumerate(self.obstacles)]
                   + [("wall", w.volume_box()), ("protected", self.protected)])
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                (la, a), (lb, b) = regions[i], regions[j]
                if a.overlaps(b):
                    raise InvalidScene("%s overlaps %s" % (la, lb))
        # physics limits surface early, not at first load
        self.params()


def _box_from_json(obj, where: str) -> Box:
    try:
        return Box(tuple(obj["lo"]), tuple(obj["hi"]))
    except (KeyError, TypeError) as exc:
        raise InvalidScene("%s: expected {lo: [x,y,z], hi: [x,y,z]} (%s)"
                           % (where, exc))


def scene_from_json(text: str) -> SceneSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScene("not valid JSON: %s" % exc)

    def need(key):
        if key not in raw:
            raise InvalidScene("missing field %r" % key)
        return raw[key]

    phys = raw.get("physics", {})
    wall_raw = need("wall")
    try:
        wall = WallRegion(x=tuple(wall_raw["x"]), y=tuple(wall_raw["y"]),
                          base=int(wall_raw["base"]),
                          max_height=int(wall_raw["max_height"]),
                          initial_height=int(wall_raw.get("initial_height", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScene("wall: %s" % exc)
    det_raw = raw.get("detectors", {})
    detectors = DetectorConfig(
        overflow_eps=float(det_raw.get("overflow_eps", 0.5)),
        stabilization_speed=float(det_raw.get("stabilization_speed", 1e-3)),
        stabilization_window=int(det_raw.get("stabilization_window", 200)))
    spec = SceneSpec(
        name=str(need("name")),
        dims=tuple(int(d) for d in need("dims")),
        dx=float(need("dx")),
        tau=float(phys.get("tau", 0.55)),
        gravity=tuple(float(g) for g in phys.get("gravity", (0, 0, -5e-4))),
        water=tuple(_box_from_json(b, "water[%d]" % i)
                    for i, b in enumerate(raw.get("water", []))),
        obstacles=tuple(_box_from_json(b, "obstacles[%d]" % i)
                        for i, b in enumerate(raw.get("obstacles", []))),
        wall=wall,
        protected=_box_from_json(need("protected"), "protected"),
        optimal_height=int(need("optimal_height")),
        detectors=detectors,
        next_scene=raw.get("next_scene"),
        notes=str(raw.get("notes", "")))
    spec.validate()
    return spec


def scene_to_json(spec: SceneSpec) -> str:
    doc = {
        "name": spec.name,
        "dims": list(spec.dims),
        "dx": spec.dx,
        "physics": {"tau": spec.tau, "gravity": list(spec.gravity)},
        "water": [{"lo": list(b.lo), "hi": list(b.hi)} for b in spec.water],
        "obstacles": [{"lo": list(b.lo), "hi": list(b.hi)}
                      for b in spec.obstacles],
        "wall": {"x": list(spec.wall.x), "y": list(spec.wall.y),
                 "base": spec.wall.base, "max_height": spec.wall.max_height,
                 "initial_height": spec.wall.initial_height},
        "protected": {"lo": list(spec.protected.lo),
                      "hi": list(spec.protected.hi)},
        "optimal_height": spec.optimal_height,
        "detectors": {
            "overflow_eps": spec.detectors.overflow_eps,
            "stabilization_speed": spec.detectors.stabilization_speed,
            "stabilization_window": spec.detectors.stabilization_window},
        "next_scene": spec.next_scene,
        "notes": spec.notes,
    }
    return json.dumps(doc, indent=2) + "\n"


def load_scene_file(path: Path | str) -> SceneSpec:
    return scene_from_json(Path(path).read_text())


def find_scene(name: str, scene_dir: Optional[Path | str] = None) -> SceneSpec:
    """Resolve a scene by name against a directory, then the packaged set."""
    if not re.fullmatch(r"[A-Za-z0-9_\-]+", name):
        raise InvalidScene("scene name %r: letters, digits, _ and - only"
                           % name)
    candidates = []
    if scene_dir is not None:
        candidates.append(Path(scene_dir) / (name + ".json"))
    candidates.append(PACKAGED_SCENE_DIR / (name + ".json"))
    for p in candidates:
        if p.is_file():
            return load_scene_file(p)
    raise InvalidScene("scene %r not found" % name)


# -------------------------------------------------------------- scene loading

def load_scene(spec: SceneSpec,
               wall_height: Optional[int] = None) -> Simulation:
    """Build the initial grid: water boxes as resting liquid (m = rho0 per
    cell), obstacles and domain faces as walls, the buildable wall raised
    to `wall_height` (the scene's initial height when None), everything
    else gas, and the liquid skin converted to interface."""
    spec.validate()
    h = spec.wall.initial_height if wall_height is None else int(wall_height)
    if not 0 <= h <= spec.wall.max_height:
        raise InvalidScene("wall height %d outside [0, %d]"
                           % (h, spec.wall.max_height))
    sim = Simulation(spec.dims, spec.params())
    for b in spec.water:
        fill_water_box(sim, b.lo, b.hi)
    for b in spec.obstacles:
        sim.flags[b.slices()] = CellFlag.WALL
        sim.mass[b.slices()] = 0.0
        sim.f[(slice(None),) + b.slices()] = 0.0
    if h > 0:
        w = spec.wall
        wall_box = Box((w.x[0], w.y[0], w.base),
                       (w.x[1], w.y[1], w.base + h))
        sim.flags[wall_box.slices()] = CellFlag.WALL
    box_walls(sim)
    settle_surface(sim)
    return sim


def scene_sim_factory(spec: SceneSpec,
                      wall_height: Optional[int] = None
                      ) -> Callable[[], Simulation]:
    return lambda: load_scene(spec, wall_height)


# ----------------------------------------------------------------- detectors

def wall_height(flags: np.ndarray, spec: SceneSpec) -> int:
    """Contiguous wall cells above the base, minimized over the footprint.

    A single gap in any column caps the whole wall: water pours through
    the lowest breach, so that is the height that matters.
    """
    w = spec.wall
    col = flags[w.x[0]:w.x[1], w.y[0]:w.y[1],
                w.base:w.base + w.max_height] == CellFlag.WALL
    if col.size == 0:
        return 0
    # first non-wall layer per column, scanning upward
    run = np.where(col.all(axis=2), col.shape[2], np.argmin(col, axis=2))
    return int(run.min())


def protected_fill(sim: Simulation, spec: SceneSpec) -> np.ndarray:
    """Fill fractions over the protected region only (cheap per-step)."""
    sl = spec.protected.slices()
    flags = sim.flags[sl]
    f = sim.f[(slice(None),) + sl]
    rho = f.sum(axis=0)
    mass = sim.mass[sl]
    eps = np.zeros_like(rho)
    eps[flags == CellFlag.LIQUID] = 1.0
    ifc = flags == CellFlag.INTERFACE
    eps[ifc] = mass[ifc] / np.maximum(rho[ifc], 1e-300)
    return np.clip(eps, 0.0, 1.0)


def detect_overflow(sim: Simulation, spec: SceneSpec) -> bool:
    return bool(np.any(protected_fill(sim, spec)
                       >= spec.detectors.overflow_eps))


def max_active_speed(sim: Simulation) -> float:
    """Largest flow speed over liquid and interface cells; 0 without fluid.

    Uses the moments the last step already computed instead of a second
    moment pass; the one-step lag is far below any detector window.
    """
    if sim.last_macro is None:
        from .core import moments
        _, u = moments(sim.f)
    else:
        u = sim.last_macro.u
    flat = sim.flags.ravel()
    active = (flat == CellFlag.LIQUID) | (flat == CellFlag.INTERFACE)
    if not active.any():
        return 0.0
    sq = (u[0].ravel()[active] ** 2 + u[1].ravel()[active] ** 2
          + u[2].ravel()[active] ** 2)
    return float(np.sqrt(sq.max()))


class StabilizationTracker:
    """Counts consecutive quiet steps; fires once when the window fills."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.quiet_steps = 0
        self.fired = False

    def reset(self) -> None:
        self.quiet_steps = 0
        self.fired = False

    def update(self, speed: float) -> bool:
        """Feed one step's peak speed; True exactly when stabilization
        fires (the window just filled for the first time since reset)."""
        if speed < self.config.stabilization_speed:
            self.quiet_steps += 1
        else:
            self.quiet_steps = 0
            return False
        if self.quiet_steps >= self.config.stabilization_window \
                and not self.fired:
            self.fired = True
            return True
        return False


def evaluate_attempt(spec: SceneSpec, height: int, overflow_fired: bool,
                     stabilized: bool) -> Optional[Outcome]:
    """Judge the current attempt once a detector has fired.

    Overflow always loses.  A stabilized run wins at exactly the optimal
    height and loses as over-built above it.  Stabilized below the optimal
    height returns None: the scene is not solved yet (the player removed
    water or the wave has not arrived), so the attempt stays open.
    """
    if overflow_fired:
        return Outcome.OVERFLOW
    if not stabilized:
        return None
    if height > spec.optimal_height:
        return Outcome.OVERBUILT
    if height == spec.optimal_height:
        return Outcome.SUCCESS
    return None


# ------------------------------------------------------------------ event log

@dataclass(frozen=True)
class LogRecord:
    wall_clock_s: float
    timestep: int
    event: str
    details: str = ""


class EventLog:
    """Append-only, tab-separated, timestamp-ordered session record."""

    def __init__(self, path: Optional[Path | str] = None):
        self.records: list[LogRecord] = []
        # one log file per session: truncate, then write through per record
        self._fh = open(path, "w") if path is not None else None

    def append(self, wall_clock_s: float, timestep: int, event: str,
               details: str = "") -> LogRecord:
        if self.records:
            wall_clock_s = max(wall_clock_s, self.records[-1].wall_clock_s)
        details = " ".join(str(details).split())  # keep the line single-line
        rec = LogRecord(wall_clock_s, timestep, event, details)
        self.records.append(rec)
        if self._fh is not None:
            self._fh.write(format_record(rec) + "\n")
            self._fh.flush()
        return rec

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def dumps(self) -> str:
        return "".join(format_record(r) + "\n" for r in self.records)

    def write(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps())


def format_record(rec: LogRecord) -> str:
    return "%.6f\t%d\t%s\t%s" % (rec.wall_clock_s, rec.timestep,
                                 rec.event, rec.details)


def parse_log(text: str) -> list[LogRecord]:
    records = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t", 3)
        if len(parts) < 3:
            raise ValueError("log line %d: expected at least 3 tab fields"
                             % n)
        records.append(LogRecord(float(parts[0]), int(parts[1]), parts[2],
                                 parts[3] if len(parts) > 3 else ""))
    return records


def read_log(path: Path | str) -> list[LogRecord]:
    return parse_log(Path(path).read_text())


# -------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Metrics:
    tct: float
    failures: int
    observation_time: float


OUTCOME_EVENTS = ("overflow", "overbuilt", "success")


def _observation_time(records: Sequence[LogRecord]) -> float:
    gaps = []
    for i, rec in enumerate(records):
        if rec.event not in OUTCOME_EVENTS:
            continue
        for later in records[i + 1:]:
            if later.event == "edit":
                gaps.append(later.wall_clock_s - rec.wall_clock_s)
                break
    return float(np.mean(gaps)) if gaps else 0.0


def compute_metrics(records: Sequence[LogRecord]) -> Metrics:
    """Pure function of the log: task completion time from scene_loaded to
    success, failure count, and mean observation gap from each outcome to
    the following edit batch."""
    failures = sum(1 for r in records if r.event in ("overflow", "overbuilt"))
    obs = _observation_time(records)
    loaded = [r for r in records if r.event == "scene_loaded"]
    if not loaded:
        raise IncompleteLog("log has no scene_loaded record", failures, obs)
    succ = [r for r in records if r.event == "success"]
    if not succ:
        raise IncompleteLog("log has no success record (task not completed)",
                            failures, obs)
    tct = succ[0].wall_clock_s - loaded[0].wall_clock_s
    return Metrics(tct=tct, failures=failures, observation_time=obs)


# ------------------------------------------------------------------- runtime

class ScenarioRuntime:
    """Wires detectors, the event log and scene progression into a driver.

    Construct the driver first, then the runtime; the runtime takes over
    the driver's detector/observer/load hooks and logs the initial scene.
    """

    def __init__(self, spec: SceneSpec, driver: SteeringDriver, *,
                 scene_dir: Optional[Path | str] = None,
                 log_path: Optional[Path | str] = None,
                 clock: Optional[Callable[[], float]] = None):
        self.spec = spec
        self.driver = driver
        self.scene_dir = scene_dir
        self.log = EventLog(log_path)
        self._clock = clock or time.monotonic
        self._t0 = self._clock()
        self._pending_spec: Optional[SceneSpec] = None
        self._tracker = StabilizationTracker(spec.detectors)
        self._overflow_fired = False
        self._attempt_open = True
        driver.detector = self.on_step
        driver.observer = self.on_command
        driver.on_load = self.on_load
        driver.scene_loader = self.loader
        # the driver loaded its first scene before these hooks existed
        self.on_load()

    # -- plumbing ---------------------------------------------------------

    def now(self) -> float:
        return self._clock() - self._t0

    def _event(self, code: int, event: str, details: str = "") -> None:
        t = self.driver.timestep
        self.log.append(self.now(), t, event, details)
        self.driver.sink(protocol.Event(code, t))

    def loader(self, name: str) -> Callable[[], Simulation]:
        try:
            spec = find_scene(name, self.scene_dir)
        except InvalidScene as exc:
            raise CommandRejected(protocol.ERR_BAD_SCENE, str(exc))
        self._pending_spec = spec
        return scene_sim_factory(spec)

    def on_load(self) -> None:
        if self._pending_spec is not None:
            self.spec = self._pending_spec
            self._pending_spec = None
        self._tracker = StabilizationTracker(self.spec.detectors)
        self._overflow_fired = False
        self._attempt_open = True
        self._event(protocol.E_SCENE_LOADED, "scene_loaded", self.spec.name)

    def on_command(self, msg: object) -> None:
        if isinstance(msg, protocol.Control):
            self.log.append(self.now(), self.driver.timestep, "control",
                            VERB_NAMES[msg.verb])
        elif isinstance(msg, protocol.EditCells):
            self.log.append(self.now(), self.driver.timestep, "edit",
                            "%d cells" % len(msg.edits))
            # an edit opens the next attempt and re-arms both detectors
            self._tracker.reset()
            self._overflow_fired = False
            self._attempt_open = True
        elif isinstance(msg, protocol.Telemetry):
            self.log.append(self.now(), self.driver.timestep, "camera",
                            msg.detail)

    def log_camera(self, detail: str) -> None:
        self.log.append(self.now(), self.driver.timestep, "camera", detail)

    # -- per-step detection -------------------------------------------------

    def on_step(self, driver: SteeringDriver) -> None:
        sim = driver.sim
        if (self._attempt_open and not self._overflow_fired
                and detect_overflow(sim, self.spec)):
            self._overflow_fired = True
            self._event(protocol.E_OVERFLOW, "overflow")
            self._event(protocol.E_FAILURE_REGISTERED, "failure_registered",
                        "overflow")
            self._attempt_open = False
        if self._tracker.update(max_active_speed(sim)):
            self._event(protocol.E_STABILIZED, "stabilized")
            if self._attempt_open:
                h = wall_height(sim.flags, self.spec)
                outcome = evaluate_attempt(self.spec, h, False, True)
                if outcome is Outcome.OVERBUILT:
                    self._event(protocol.E_OVERBUILT, "overbuilt",
                                "height %d > optimal %d"
                                % (h, self.spec.optimal_height))
                    self._event(protocol.E_FAILURE_REGISTERED,
                                "failure_registered", "overbuilt")
                    self._attempt_open = False
                elif outcome is Outcome.SUCCESS:
                    self._event(protocol.E_SUCCESS, "success",
                                "height %d" % h)
                    self._attempt_open = False
                    try:
                        driver.finish()
                    except CommandRejected:
                        # solved by single-stepping while not Running;
                        # the lifecycle stays where it is
                        pass
                    if self.spec.next_scene:
                        driver.submit(protocol.LoadScene(self.spec.next_scene))
                # below optimal height: not solved, keep watching


def build_session(spec: SceneSpec, *,
                  cadence: int = 4,
                  mode: str = "interactive",
                  sink: Optional[Callable[[object], None]] = None,
                  scene_dir: Optional[Path | str] = None,
                  log_path: Optional[Path | str] = None,
                  clock: Optional[Callable[[], float]] = None
                  ) -> tuple[SteeringDriver, ScenarioRuntime]:
    """One call wiring a scene into a ready driver + runtime pair."""
    if mode not in ("interactive", "restart"):
        raise ValueError("mode must be 'interactive' or 'restart'")
    driver = SteeringDriver(scene_sim_factory(spec), cadence=cadence,
                            sink=sink)
    driver.reject_edits_while_running = (mode == "restart")
    runtime = ScenarioRuntime(spec, driver, scene_dir=scene_dir,
                              log_path=log_path, clock=clock)
    return driver, runtime


# ------------------------------------------------------------- offline sweep

def attempt_outcome_for_height(spec: SceneSpec, height: int,
                               max_steps: int = 20000) -> tuple[str, int]:
    """Run the scene untouched with the wall pre-built to `height`.

    Returns ("overflow" | "stabilized", timestep of the event).
    """
    sim = load_scene(spec, wall_height=height)
    tracker = StabilizationTracker(spec.detectors)
    for _ in range(max_steps):
        sim.step()
        if detect_overflow(sim, spec):
            return "overflow", sim.timestep
        if tracker.update(max_active_speed(sim)):
            return "stabilized", sim.timestep
    raise InconsistentScene(
        "height %d: neither overflow nor stabilization within %d steps"
        % (height, max_steps))


def sweep_heights(spec: SceneSpec, max_steps: int = 20000,
                  report: Optional[Callable[[int, str, int], None]] = None
                  ) -> list[str]:
    """Outcome for every wall height 0..max_height (offline oracle)."""
    outcomes = []
    for h in range(spec.wall.max_height + 1):
        outcome, t = attempt_outcome_for_height(spec, h, max_steps)
        outcomes.append(outcome)
        if report is not None:
            report(h, outcome, t)
    return outcomes


def verify_optimal_height(spec: SceneSpec, max_steps: int = 20000,
                          report=None) -> int:
    """Re-run the sweep and check the stored optimal height is the true
    minimum passing height and that passing is monotone in height."""
    outcomes = sweep_heights(spec, max_steps, report)
    passing = [h for h, o in enumerate(outcomes) if o == "stabilized"]
    if not passing:
        raise InconsistentScene("no wall height up to %d contains the water"
                                % spec.wall.max_height)
    h_star = passing[0]
    if any(outcomes[h] != "stabilized" for h in range(h_star,
                                                      len(outcomes))):
        raise InconsistentScene(
            "sweep is not monotone: %s" % list(enumerate(outcomes)))
    if h_star != spec.optimal_height:
        raise InconsistentScene(
            "stored optimal height %d but the sweep found %d"
            % (spec.optimal_height, h_star))
    return h_star
