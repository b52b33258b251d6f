/**
 * Binary steering protocol, client side.
 *
 * Every frame is a little-endian u32 length counting all bytes after
 * itself, then one type byte, then the payload.  The server sends the
 * identical frame bytes over raw TCP and inside binary WebSocket messages
 * (one frame per message), so this codec and the server's must agree on
 * every byte; the conformance vectors in the test suite are shared.
 *
 * Decoding never throws on hostile bytes: unparseable frames come back as
 * `violation` items and the stream resynchronizes at the next boundary.
 */

export const PROTOCOL_VERSION = 1;

export const T_HELLO = 0x01;
export const T_CONTROL = 0x02;
export const T_EDIT_CELLS = 0x03;
export const T_SET_PARAM = 0x04;
export const T_LOAD_SCENE = 0x05;
export const T_SET_CADENCE = 0x06;
export const T_TELEMETRY = 0x07;
export const T_WELCOME = 0x81;
export const T_SNAPSHOT = 0x82;
export const T_EVENT = 0x83;
export const T_ACK = 0x84;
export const T_ERROR = 0x85;

export const V_START = 0;
export const V_PAUSE = 1;
export const V_RESUME = 2;
export const V_STOP = 3;
export const V_RESTART = 4;
export const V_STEP = 5;

export const A_EMPTY = 0;
export const A_SET_WALL = 1;
export const A_FILL_WATER = 2;

export const P_TAU = 0;
export const P_GRAVITY_X = 1;
export const P_GRAVITY_Y = 2;
export const P_GRAVITY_Z = 3;
export const P_CADENCE = 4;

export const E_OVERFLOW = 0;
export const E_OVERBUILT = 1;
export const E_STABILIZED = 2;
export const E_SUCCESS = 3;
export const E_SCENE_LOADED = 4;
export const E_FAILURE_REGISTERED = 5;

export const ERR_VERSION_MISMATCH = 0;
export const ERR_MALFORMED_FRAME = 1;
export const ERR_UNKNOWN_TYPE = 2;
export const ERR_OUT_OF_BOUNDS = 3;
export const ERR_ILLEGAL_TRANSITION = 4;
export const ERR_BAD_PARAM = 5;
export const ERR_STABILITY_FAULT = 6;
export const ERR_MODE_VIOLATION = 7;
export const ERR_NOT_READY = 8;
export const ERR_BAD_SCENE = 9;

export const EV_NAMES: Record<number, string> = {
  [E_OVERFLOW]: "overflow",
  [E_OVERBUILT]: "overbuilt",
  [E_STABILIZED]: "stabilized",
  [E_SUCCESS]: "success",
  [E_SCENE_LOADED]: "scene_loaded",
  [E_FAILURE_REGISTERED]: "failure_registered",
};

export const ERR_NAMES: Record<number, string> = {
  [ERR_VERSION_MISMATCH]: "version_mismatch",
  [ERR_MALFORMED_FRAME]: "malformed_frame",
  [ERR_UNKNOWN_TYPE]: "unknown_type",
  [ERR_OUT_OF_BOUNDS]: "out_of_bounds",
  [ERR_ILLEGAL_TRANSITION]: "illegal_transition",
  [ERR_BAD_PARAM]: "bad_param",
  [ERR_STABILITY_FAULT]: "stability_fault",
  [ERR_MODE_VIOLATION]: "mode_violation",
  [ERR_NOT_READY]: "not_ready",
  [ERR_BAD_SCENE]: "bad_scene",
};

export const WALL_BYTE = 255;
export const EPS_SCALE = 250;

// Frames larger than this are treated as malformed rather than buffered.
export const MAX_FRAME_LENGTH = 1 << 26;

export type Edit = { x: number; y: number; z: number; action: number };

export type Hello = { kind: "hello"; version: number };
export type Control = { kind: "control"; verb: number };
export type EditCells = { kind: "edit_cells"; edits: Edit[] };
export type SetParam = { kind: "set_param"; target: number; value: number };
export type LoadScene = { kind: "load_scene"; name: string };
export type SetCadence = { kind: "set_cadence"; cadence: number };
export type Telemetry = { kind: "telemetry"; detail: string };
export type Welcome = {
  kind: "welcome";
  version: number;
  nx: number;
  ny: number;
  nz: number;
  dx: number;
  dt: number;
};
export type Snapshot = {
  kind: "snapshot";
  timestep: number;
  seq: number;
  cells: Uint8Array;
};
export type Event = { kind: "event"; code: number; timestep: number };
export type Ack = { kind: "ack"; echo: number };
export type ErrorMsg = { kind: "error"; code: number; message: string };
export type Violation = {
  kind: "violation";
  code: number;
  reason: string;
  frameType: number | null;
};

export type Message =
  | Hello
  | Control
  | EditCells
  | SetParam
  | LoadScene
  | SetCadence
  | Telemetry
  | Welcome
  | Snapshot
  | Event
  | Ack
  | ErrorMsg;

export type Decoded = Message | Violation;

export class RangeError_ extends Error {}

function checkU(value: number, bits: number, name: string): number {
  if (!Number.isInteger(value) || value < 0 || value >= 2 ** bits) {
    throw new RangeError_(`${name} ${value} outside u${bits}`);
  }
  return value;
}

// timestep and seq travel as u64; past 2^53 a JS number would silently lose
// precision, so the decoder refuses rather than misreport a timestep
function u64ToNumber(v: bigint, name: string): number {
  if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new RangeError_(`${name} ${v} exceeds 2^53-1`);
  }
  return Number(v);
}

const textEncoder = new TextEncoder();
const textDecoder = new TextDecoder("utf-8", { fatal: true });

class FrameWriter {
  private view: DataView;
  private pos = 4; // room for the length prefix
  private buf: ArrayBuffer;

  constructor(capacity: number) {
    this.buf = new ArrayBuffer(4 + capacity);
    this.view = new DataView(this.buf);
  }

  u8(v: number): this {
    this.view.setUint8(this.pos, v);
    this.pos += 1;
    return this;
  }

  u16(v: number): this {
    this.view.setUint16(this.pos, v, true);
    this.pos += 2;
    return this;
  }

  u32(v: number): this {
    this.view.setUint32(this.pos, v, true);
    this.pos += 4;
    return this;
  }

  u64(v: number): this {
    this.view.setBigUint64(this.pos, BigInt(v), true);
    this.pos += 8;
    return this;
  }

  f64(v: number): this {
    this.view.setFloat64(this.pos, v, true);
    this.pos += 8;
    return this;
  }

  bytes(v: Uint8Array): this {
    new Uint8Array(this.buf, this.pos, v.length).set(v);
    this.pos += v.length;
    return this;
  }

  frame(): Uint8Array<ArrayBuffer> {
    this.view.setUint32(0, this.pos - 4, true);
    return new Uint8Array(this.buf, 0, this.pos);
  }
}

/** Serialize one message into a complete length-prefixed frame. */
export function encode(msg: Message): Uint8Array<ArrayBuffer> {
  switch (msg.kind) {
    case "hello":
      return new FrameWriter(3)
        .u8(T_HELLO)
        .u16(checkU(msg.version, 16, "version"))
        .frame();
    case "control":
      if (msg.verb < 0 || msg.verb > V_STEP || !Number.isInteger(msg.verb)) {
        throw new RangeError_(`unknown control verb ${msg.verb}`);
      }
      return new FrameWriter(2).u8(T_CONTROL).u8(msg.verb).frame();
    case "edit_cells": {
      const w = new FrameWriter(5 + 7 * msg.edits.length)
        .u8(T_EDIT_CELLS)
        .u32(checkU(msg.edits.length, 32, "count"));
      for (const e of msg.edits) {
        if (e.action < 0 || e.action > A_FILL_WATER) {
          throw new RangeError_(`unknown edit action ${e.action}`);
        }
        w.u16(checkU(e.x, 16, "x"))
          .u16(checkU(e.y, 16, "y"))
          .u16(checkU(e.z, 16, "z"))
          .u8(e.action);
      }
      return w.frame();
    }
    case "set_param":
      if (msg.target < 0 || msg.target > P_CADENCE) {
        throw new RangeError_(`unknown param target ${msg.target}`);
      }
      return new FrameWriter(10)
        .u8(T_SET_PARAM)
        .u8(msg.target)
        .f64(msg.value)
        .frame();
    case "load_scene": {
      const raw = textEncoder.encode(msg.name);
      checkU(raw.length, 16, "name length");
      return new FrameWriter(3 + raw.length)
        .u8(T_LOAD_SCENE)
        .u16(raw.length)
        .bytes(raw)
        .frame();
    }
    case "set_cadence":
      return new FrameWriter(5)
        .u8(T_SET_CADENCE)
        .u32(checkU(msg.cadence, 32, "cadence"))
        .frame();
    case "telemetry": {
      const raw = textEncoder.encode(msg.detail);
      checkU(raw.length, 16, "detail length");
      return new FrameWriter(3 + raw.length)
        .u8(T_TELEMETRY)
        .u16(raw.length)
        .bytes(raw)
        .frame();
    }
    case "welcome":
      return new FrameWriter(31)
        .u8(T_WELCOME)
        .u16(checkU(msg.version, 16, "version"))
        .u32(checkU(msg.nx, 32, "nx"))
        .u32(checkU(msg.ny, 32, "ny"))
        .u32(checkU(msg.nz, 32, "nz"))
        .f64(msg.dx)
        .f64(msg.dt)
        .frame();
    case "snapshot":
      return new FrameWriter(17 + msg.cells.length)
        .u8(T_SNAPSHOT)
        .u64(checkU(msg.timestep, 64, "timestep"))
        .u64(checkU(msg.seq, 64, "seq"))
        .bytes(msg.cells)
        .frame();
    case "event":
      if (msg.code < 0 || msg.code > E_FAILURE_REGISTERED) {
        throw new RangeError_(`unknown event code ${msg.code}`);
      }
      return new FrameWriter(10)
        .u8(T_EVENT)
        .u8(msg.code)
        .u64(checkU(msg.timestep, 64, "timestep"))
        .frame();
    case "ack":
      return new FrameWriter(2)
        .u8(T_ACK)
        .u8(checkU(msg.echo, 8, "echo"))
        .frame();
    case "error": {
      const raw = textEncoder.encode(msg.message);
      checkU(raw.length, 16, "message length");
      return new FrameWriter(4 + raw.length)
        .u8(T_ERROR)
        .u8(checkU(msg.code, 8, "code"))
        .u16(raw.length)
        .bytes(raw)
        .frame();
    }
  }
}

function parseBody(body: Uint8Array): Decoded {
  const mtype = body[0];
  const view = new DataView(body.buffer, body.byteOffset + 1, body.length - 1);
  const n = view.byteLength;
  const bad = (reason: string): Violation => ({
    kind: "violation",
    code: ERR_MALFORMED_FRAME,
    reason,
    frameType: mtype,
  });
  const utf8 = (offset: number, length: number): string | null => {
    try {
      return textDecoder.decode(
        new Uint8Array(view.buffer, view.byteOffset + offset, length),
      );
    } catch {
      return null;
    }
  };

  switch (mtype) {
    case T_HELLO:
      if (n !== 2) return bad(`hello payload ${n} bytes, want 2`);
      return { kind: "hello", version: view.getUint16(0, true) };
    case T_CONTROL: {
      if (n !== 1) return bad(`control payload ${n} bytes, want 1`);
      const verb = view.getUint8(0);
      if (verb > V_STEP) return bad(`control verb ${verb} unknown`);
      return { kind: "control", verb };
    }
    case T_EDIT_CELLS: {
      if (n < 4) return bad(`edit payload ${n} bytes, want at least 4`);
      const count = view.getUint32(0, true);
      if (n !== 4 + 7 * count) {
        return bad(`edit payload ${n} bytes, want ${4 + 7 * count} for count ${count}`);
      }
      const edits: Edit[] = [];
      for (let i = 0, off = 4; i < count; i++, off += 7) {
        const action = view.getUint8(off + 6);
        if (action > A_FILL_WATER) return bad(`edit action ${action} unknown`);
        edits.push({
          x: view.getUint16(off, true),
          y: view.getUint16(off + 2, true),
          z: view.getUint16(off + 4, true),
          action,
        });
      }
      return { kind: "edit_cells", edits };
    }
    case T_SET_PARAM: {
      if (n !== 9) return bad(`set-param payload ${n} bytes, want 9`);
      const target = view.getUint8(0);
      if (target > P_CADENCE) return bad(`param target ${target} unknown`);
      return { kind: "set_param", target, value: view.getFloat64(1, true) };
    }
    case T_LOAD_SCENE: {
      if (n < 2) return bad(`load-scene payload ${n} bytes, want at least 2`);
      const ln = view.getUint16(0, true);
      if (n !== 2 + ln) {
        return bad(`load-scene name length ${ln} does not fill payload ${n}`);
      }
      const name = utf8(2, ln);
      if (name === null) return bad("load-scene name is not valid utf-8");
      return { kind: "load_scene", name };
    }
    case T_SET_CADENCE:
      if (n !== 4) return bad(`set-cadence payload ${n} bytes, want 4`);
      return { kind: "set_cadence", cadence: view.getUint32(0, true) };
    case T_TELEMETRY: {
      if (n < 2) return bad(`telemetry payload ${n} bytes, want at least 2`);
      const ln = view.getUint16(0, true);
      if (n !== 2 + ln) {
        return bad(`telemetry detail length ${ln} does not fill payload ${n}`);
      }
      const detail = utf8(2, ln);
      if (detail === null) return bad("telemetry detail is not valid utf-8");
      return { kind: "telemetry", detail };
    }
    case T_WELCOME:
      if (n !== 30) return bad(`welcome payload ${n} bytes, want 30`);
      return {
        kind: "welcome",
        version: view.getUint16(0, true),
        nx: view.getUint32(2, true),
        ny: view.getUint32(6, true),
        nz: view.getUint32(10, true),
        dx: view.getFloat64(14, true),
        dt: view.getFloat64(22, true),
      };
    case T_SNAPSHOT: {
      if (n < 16) return bad(`snapshot payload ${n} bytes, want at least 16`);
      let timestep: number;
      let seq: number;
      try {
        timestep = u64ToNumber(view.getBigUint64(0, true), "timestep");
        seq = u64ToNumber(view.getBigUint64(8, true), "seq");
      } catch (e) {
        return bad((e as Error).message);
      }
      return { kind: "snapshot", timestep, seq, cells: body.slice(17) };
    }
    case T_EVENT: {
      if (n !== 9) return bad(`event payload ${n} bytes, want 9`);
      const code = view.getUint8(0);
      if (code > E_FAILURE_REGISTERED) return bad(`event code ${code} unknown`);
      let timestep: number;
      try {
        timestep = u64ToNumber(view.getBigUint64(1, true), "timestep");
      } catch (e) {
        return bad((e as Error).message);
      }
      return { kind: "event", code, timestep };
    }
    case T_ACK:
      if (n !== 1) return bad(`ack payload ${n} bytes, want 1`);
      return { kind: "ack", echo: view.getUint8(0) };
    case T_ERROR: {
      if (n < 3) return bad(`error payload ${n} bytes, want at least 3`);
      const code = view.getUint8(0);
      const ln = view.getUint16(1, true);
      if (n !== 3 + ln) {
        return bad(`error message length ${ln} does not fill payload ${n}`);
      }
      const message = utf8(3, ln);
      if (message === null) return bad("error message is not valid utf-8");
      return { kind: "error", code, message };
    }
    default:
      return {
        kind: "violation",
        code: ERR_UNKNOWN_TYPE,
        reason: `unknown frame type 0x${mtype.toString(16).padStart(2, "0")}`,
        frameType: mtype,
      };
  }
}

/** Incremental frame decoder holding the unconsumed tail between feeds. */
export class FrameDecoder {
  private buf = new Uint8Array(0);

  feed(data: Uint8Array): Decoded[] {
    if (this.buf.length === 0) {
      this.buf = data.slice();
    } else {
      const merged = new Uint8Array(this.buf.length + data.length);
      merged.set(this.buf);
      merged.set(data, this.buf.length);
      this.buf = merged;
    }
    const items: Decoded[] = [];
    const view = new DataView(this.buf.buffer, this.buf.byteOffset);
    let pos = 0;
    for (;;) {
      if (this.buf.length - pos < 4) break;
      const length = view.getUint32(pos, true);
      if (length < 1 || length > MAX_FRAME_LENGTH) {
        // cannot delimit a payload; skip the length word and resynchronize
        items.push({
          kind: "violation",
          code: ERR_MALFORMED_FRAME,
          reason: `frame length ${length} out of range`,
          frameType: null,
        });
        pos += 4;
        continue;
      }
      if (this.buf.length - pos - 4 < length) break;
      items.push(parseBody(this.buf.subarray(pos + 4, pos + 4 + length)));
      pos += 4 + length;
    }
    this.buf = this.buf.slice(pos);
    return items;
  }

  get pending(): number {
    return this.buf.length;
  }
}
