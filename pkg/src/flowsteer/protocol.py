"""Binary steering protocol: framing, message codecs, session handshake.

Every frame is a little-endian u32 length counting all bytes after itself,
then one type byte, then the payload.  The same frame bytes travel verbatim
over a raw TCP stream or inside one binary WebSocket message each.

Client to server:
    0x01 HELLO        version u16
    0x02 CONTROL      verb u8 (0 start, 1 pause, 2 resume, 3 stop,
                               4 restart, 5 single-step)
    0x03 EDIT_CELLS   count u32, then count * (x u16, y u16, z u16,
                               action u8: 0 Empty, 1 SetWall, 2 FillWater)
    0x04 SET_PARAM    target u8 (0 tau, 1..3 gravity x/y/z,
                               4 snapshot cadence), value f64
    0x05 LOAD_SCENE   name length u16, utf-8 bytes
    0x06 SET_CADENCE  cadence u32
    0x07 TELEMETRY    detail length u16, utf-8 bytes (client-side activity
                               such as camera moves, logged server-side)

Server to client:
    0x81 WELCOME      version u16, nx u32, ny u32, nz u32, dx f64, dt f64
    0x82 SNAPSHOT     timestep u64, seq u64, nx*ny*nz cell bytes, x fastest
    0x83 EVENT        code u8 (0 overflow, 1 overbuilt, 2 stabilized,
                               3 success, 4 scene_loaded,
                               5 failure_registered), timestep u64
    0x84 ACK          echoed type u8
    0x85 ERROR        code u8, message length u16, utf-8 bytes

Snapshot cell byte: 255 wall, 0..250 = round(eps * 250), 251..254 reserved.
All multi-byte values little-endian.  Codecs are pure; decode never raises
on hostile bytes, it reports violations and resynchronizes at the next
frame boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

PROTOCOL_VERSION = 1

T_HELLO = 0x01
T_CONTROL = 0x02
T_EDIT_CELLS = 0x03
T_SET_PARAM = 0x04
T_LOAD_SCENE = 0x05
T_SET_CADENCE = 0x06
T_TELEMETRY = 0x07
T_WELCOME = 0x81
T_SNAPSHOT = 0x82
T_EVENT = 0x83
T_ACK = 0x84
T_ERROR = 0x85

# CONTROL verbs
V_START, V_PAUSE, V_RESUME, V_STOP, V_RESTART, V_STEP = range(6)

# EDIT_CELLS actions
A_EMPTY, A_SET_WALL, A_FILL_WATER = range(3)

# SET_PARAM targets
P_TAU, P_GRAVITY_X, P_GRAVITY_Y, P_GRAVITY_Z, P_CADENCE = range(5)

# EVENT codes
E_OVERFLOW, E_OVERBUILT, E_STABILIZED, E_SUCCESS, E_SCENE_LOADED, \
    E_FAILURE_REGISTERED = range(6)

# ERROR codes
ERR_VERSION_MISMATCH = 0
ERR_MALFORMED_FRAME = 1
ERR_UNKNOWN_TYPE = 2
ERR_OUT_OF_BOUNDS = 3
ERR_ILLEGAL_TRANSITION = 4
ERR_BAD_PARAM = 5
ERR_STABILITY_FAULT = 6
ERR_MODE_VIOLATION = 7
ERR_NOT_READY = 8
ERR_BAD_SCENE = 9

WALL_BYTE = 255
EPS_SCALE = 250

# Frames larger than this are treated as malformed rather than buffered.
MAX_FRAME_LENGTH = 1 << 26


class RangeError(ValueError):
    """A message field is outside its wire-format range."""


@dataclass(frozen=True)
class Hello:
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Control:
    verb: int


@dataclass(frozen=True)
class EditCells:
    # tuples (x, y, z, action)
    edits: tuple = ()


@dataclass(frozen=True)
class SetParam:
    target: int
    value: float


@dataclass(frozen=True)
class LoadScene:
    name: str


@dataclass(frozen=True)
class SetCadence:
    cadence: int


@dataclass(frozen=True)
class Telemetry:
    detail: str


@dataclass(frozen=True)
class Welcome:
    version: int
    nx: int
    ny: int
    nz: int
    dx: float
    dt: float


@dataclass(frozen=True)
class Snapshot:
    timestep: int
    seq: int
    cells: bytes


@dataclass(frozen=True)
class Event:
    code: int
    timestep: int


@dataclass(frozen=True)
class Ack:
    echo: int


@dataclass(frozen=True)
class Error:
    code: int
    message: str


@dataclass(frozen=True)
class ProtocolViolation:
    """Reported by decode for a frame that could not be parsed."""

    code: int          # ERR_MALFORMED_FRAME or ERR_UNKNOWN_TYPE
    reason: str
    frame_type: int | None = None


Message = (Hello, Control, EditCells, SetParam, LoadScene, SetCadence,
           Telemetry, Welcome, Snapshot, Event, Ack, Error)


def _check_u(value: int, bits: int, name: str) -> int:
    v = int(value)
    if not 0 <= v < (1 << bits):
        raise RangeError(f"{name} {value} outside u{bits}")
    return v


def _frame(body: bytes) -> bytes:
    return struct.pack("<I", len(body)) + body


def encode(msg) -> bytes:
    """Serialize one message into a complete frame.

    Raises:
        RangeError: a field does not fit its wire type.
    """
    if isinstance(msg, Hello):
        return _frame(struct.pack("<BH", T_HELLO, _check_u(msg.version, 16, "version")))
    if isinstance(msg, Control):
        if msg.verb not in range(6):
            raise RangeError(f"unknown control verb {msg.verb}")
        return _frame(struct.pack("<BB", T_CONTROL, msg.verb))
    if isinstance(msg, EditCells):
        parts = [struct.pack("<BI", T_EDIT_CELLS,
                             _check_u(len(msg.edits), 32, "count"))]
        for x, y, z, action in msg.edits:
            if action not in range(3):
                raise RangeError(f"unknown edit action {action}")
            parts.append(struct.pack(
                "<HHHB",
                _check_u(x, 16, "x"), _check_u(y, 16, "y"),
                _check_u(z, 16, "z"), action))
        return _frame(b"".join(parts))
    if isinstance(msg, SetParam):
        if msg.target not in range(5):
            raise RangeError(f"unknown param target {msg.target}")
        return _frame(struct.pack("<BBd", T_SET_PARAM, msg.target, float(msg.value)))
    if isinstance(msg, LoadScene):
        raw = msg.name.encode("utf-8")
        _check_u(len(raw), 16, "name length")
        return _frame(struct.pack("<BH", T_LOAD_SCENE, len(raw)) + raw)
    if isinstance(msg, SetCadence):
        return _frame(struct.pack("<BI", T_SET_CADENCE,
                                  _check_u(msg.cadence, 32, "cadence")))
    if isinstance(msg, Telemetry):
        raw = msg.detail.encode("utf-8")
        _check_u(len(raw), 16, "detail length")
        return _frame(struct.pack("<BH", T_TELEMETRY, len(raw)) + raw)
    if isinstance(msg, Welcome):
        return _frame(struct.pack(
            "<BHIIIdd", T_WELCOME, _check_u(msg.version, 16, "version"),
            _check_u(msg.nx, 32, "nx"), _check_u(msg.ny, 32, "ny"),
            _check_u(msg.nz, 32, "nz"), float(msg.dx), float(msg.dt)))
    if isinstance(msg, Snapshot):
        return _frame(struct.pack(
            "<BQQ", T_SNAPSHOT, _check_u(msg.timestep, 64, "timestep"),
            _check_u(msg.seq, 64, "seq")) + bytes(msg.cells))
    if isinstance(msg, Event):
        if msg.code not in range(6):
            raise RangeError(f"unknown event code {msg.code}")
        return _frame(struct.pack("<BBQ", T_EVENT, msg.code,
                                  _check_u(msg.timestep, 64, "timestep")))
    if isinstance(msg, Ack):
        return _frame(struct.pack("<BB", T_ACK, _check_u(msg.echo, 8, "echo")))
    if isinstance(msg, Error):
        raw = msg.message.encode("utf-8")
        _check_u(len(raw), 16, "message length")
        return _frame(struct.pack("<BBH", T_ERROR, _check_u(msg.code, 8, "code"),
                                  len(raw)) + raw)
    raise RangeError(f"cannot encode {type(msg).__name__}")


def _parse_body(body: bytes):
    """Parse one frame body (type byte + payload) or return a violation."""
    mtype = body[0]
    payload = body[1:]
    n = len(payload)

    def bad(reason: str) -> ProtocolViolation:
        return ProtocolViolation(ERR_MALFORMED_FRAME, reason, mtype)

    if mtype == T_HELLO:
        if n != 2:
            return bad(f"hello payload {n} bytes, want 2")
        return Hello(struct.unpack("<H", payload)[0])
    if mtype == T_CONTROL:
        if n != 1:
            return bad(f"control payload {n} bytes, want 1")
        verb = payload[0]
        if verb > V_STEP:
            return bad(f"control verb {verb} unknown")
        return Control(verb)
    if mtype == T_EDIT_CELLS:
        if n < 4:
            return bad(f"edit payload {n} bytes, want at least 4")
        count = struct.unpack("<I", payload[:4])[0]
        if n != 4 + 7 * count:
            return bad(f"edit payload {n} bytes, want {4 + 7 * count} for count {count}")
        edits = []
        off = 4
        for _ in range(count):
            x, y, z, action = struct.unpack_from("<HHHB", payload, off)
            if action > A_FILL_WATER:
                return bad(f"edit action {action} unknown")
            edits.append((x, y, z, action))
            off += 7
        return EditCells(tuple(edits))
    if mtype == T_SET_PARAM:
        if n != 9:
            return bad(f"set-param payload {n} bytes, want 9")
        target, value = struct.unpack("<Bd", payload)
        if target > P_CADENCE:
            return bad(f"param target {target} unknown")
        return SetParam(target, value)
    if mtype == T_LOAD_SCENE:
        if n < 2:
            return bad(f"load-scene payload {n} bytes, want at least 2")
        ln = struct.unpack("<H", payload[:2])[0]
        if n != 2 + ln:
            return bad(f"load-scene name length {ln} does not fill payload {n}")
        try:
            return LoadScene(payload[2:].decode("utf-8"))
        except UnicodeDecodeError:
            return bad("load-scene name is not valid utf-8")
    if mtype == T_SET_CADENCE:
        if n != 4:
            return bad(f"set-cadence payload {n} bytes, want 4")
        return SetCadence(struct.unpack("<I", payload)[0])
    if mtype == T_TELEMETRY:
        if n < 2:
            return bad(f"telemetry payload {n} bytes, want at least 2")
        ln = struct.unpack("<H", payload[:2])[0]
        if n != 2 + ln:
            return bad(f"telemetry detail length {ln} does not fill payload {n}")
        try:
            return Telemetry(payload[2:].decode("utf-8"))
        except UnicodeDecodeError:
            return bad("telemetry detail is not valid utf-8")
    if mtype == T_WELCOME:
        if n != 30:
            return bad(f"welcome payload {n} bytes, want 30")
        version, nx, ny, nz, dx, dt = struct.unpack("<HIIIdd", payload)
        return Welcome(version, nx, ny, nz, dx, dt)
    if mtype == T_SNAPSHOT:
        if n < 16:
            return bad(f"snapshot payload {n} bytes, want at least 16")
        timestep, seq = struct.unpack("<QQ", payload[:16])
        return Snapshot(timestep, seq, bytes(payload[16:]))
    if mtype == T_EVENT:
        if n != 9:
            return bad(f"event payload {n} bytes, want 9")
        code = payload[0]
        if code > E_FAILURE_REGISTERED:
            return bad(f"event code {code} unknown")
        return Event(code, struct.unpack("<Q", payload[1:])[0])
    if mtype == T_ACK:
        if n != 1:
            return bad(f"ack payload {n} bytes, want 1")
        return Ack(payload[0])
    if mtype == T_ERROR:
        if n < 3:
            return bad(f"error payload {n} bytes, want at least 3")
        code = payload[0]
        ln = struct.unpack("<H", payload[1:3])[0]
        if n != 3 + ln:
            return bad(f"error message length {ln} does not fill payload {n}")
        try:
            return Error(code, payload[3:].decode("utf-8"))
        except UnicodeDecodeError:
            return bad("error message is not valid utf-8")
    return ProtocolViolation(ERR_UNKNOWN_TYPE, f"unknown frame type 0x{mtype:02x}", mtype)


def decode(data: bytes):
    """Split a byte buffer into parsed messages plus the unconsumed tail.

    Returns (items, remainder) where items mixes Message instances with
    ProtocolViolation entries for frames that failed to parse.  A frame
    whose length field is zero or absurdly large cannot delimit a payload;
    its length word is skipped so the stream can resynchronize.
    """
    items = []
    view = memoryview(data)
    pos = 0
    while True:
        if len(view) - pos < 4:
            break
        length = struct.unpack_from("<I", view, pos)[0]
        if length < 1 or length > MAX_FRAME_LENGTH:
            items.append(ProtocolViolation(
                ERR_MALFORMED_FRAME, f"frame length {length} out of range"))
            pos += 4
            continue
        if len(view) - pos - 4 < length:
            break
        body = bytes(view[pos + 4: pos + 4 + length])
        items.append(_parse_body(body))
        pos += 4 + length
    return items, bytes(view[pos:])


class Decoder:
    """Incremental frame decoder holding the unconsumed tail between feeds."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list:
        self._buf.extend(data)
        items, rest = decode(bytes(self._buf))
        self._buf = bytearray(rest)
        return items

    @property
    def pending(self) -> int:
        return len(self._buf)


def quantize(eps: np.ndarray, wall: np.ndarray) -> bytes:
    """Quantize a fill-fraction field into snapshot cell bytes, x fastest.

    eps and wall are grid-shaped (nx, ny, nz); wall cells become 255, the
    rest round(eps * 250).  The quantization error is at most 1/500.
    """
    q = np.rint(np.clip(eps, 0.0, 1.0) * EPS_SCALE).astype(np.uint8)
    q[wall] = WALL_BYTE
    return q.ravel(order="F").tobytes()


def dequantize(cells: bytes, dims: tuple[int, int, int]):
    """Snapshot cell bytes back to (eps array, wall mask), grid-shaped."""
    nx, ny, nz = dims
    raw = np.frombuffer(cells, dtype=np.uint8)
    if raw.size != nx * ny * nz:
        raise ValueError(f"{raw.size} cell bytes for dims {dims}")
    grid = raw.reshape((nx, ny, nz), order="F")
    wall = grid == WALL_BYTE
    eps = np.where(wall, 0.0, np.minimum(grid, EPS_SCALE) / EPS_SCALE)
    return eps, wall


@dataclass
class Session:
    """Handshake gate: HELLO must come first and versions must match."""

    nx: int
    ny: int
    nz: int
    dx: float
    dt: float
    version: int = PROTOCOL_VERSION
    ready: bool = field(default=False, init=False)

    def handshake(self, msg):
        """First-message policy.  Returns the reply frame message.

        HELLO with a matching version yields WELCOME and opens the session;
        anything else yields an ERROR (and the connection should be closed
        on a version mismatch).
        """
        if isinstance(msg, Hello):
            if msg.version != self.version:
                return Error(ERR_VERSION_MISMATCH,
                             f"server speaks version {self.version}, "
                             f"client sent {msg.version}")
            self.ready = True
            return Welcome(self.version, self.nx, self.ny, self.nz,
                           self.dx, self.dt)
        return Error(ERR_NOT_READY, "handshake incomplete: send HELLO first")
