/**
 * Steering client over a WebSocket.  Each binary message carries exactly
 * one protocol frame (identical bytes to the raw TCP stream), so framing
 * still goes through the incremental decoder; a transport that coalesced
 * or split messages would decode the same way.
 *
 * The class takes an already-constructed socket so the browser app can
 * hand it `new WebSocket(url)` and tests can hand it a Node client; both
 * expose the same event surface.
 */

import {
  Control,
  Decoded,
  EditCells,
  Edit,
  encode,
  Message,
  PROTOCOL_VERSION,
  FrameDecoder,
} from "./protocol.js";
import { ClientSceneState } from "./state.js";
import type { Dims } from "./snapshot.js";

export type SocketLike = {
  binaryType: string;
  readyState: number;
  send(data: Uint8Array<ArrayBuffer>): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
};

export type ClientHandlers = {
  /** Called after the state has folded each decoded message in. */
  onMessage?: (msg: Decoded, changed: string) => void;
  onClose?: () => void;
};

export class SteerClient {
  readonly state: ClientSceneState;
  private decoder = new FrameDecoder();

  constructor(
    private socket: SocketLike,
    handlers: ClientHandlers = {},
    state: ClientSceneState = new ClientSceneState(),
  ) {
    this.state = state;
    socket.binaryType = "arraybuffer";
    socket.addEventListener("open", () => {
      this.sendMessage({ kind: "hello", version: PROTOCOL_VERSION });
    });
    socket.addEventListener("message", (event: { data: unknown }) => {
      const bytes = toBytes(event.data);
      if (bytes === null) return;
      for (const msg of this.decoder.feed(bytes)) {
        const changed = this.state.apply(msg);
        handlers.onMessage?.(msg, changed);
      }
    });
    socket.addEventListener("close", () => handlers.onClose?.());
  }

  sendMessage(msg: Message): void {
    this.socket.send(encode(msg));
  }

  sendControl(verb: number): void {
    const msg: Control = { kind: "control", verb };
    this.state.controlSent(verb);
    this.sendMessage(msg);
  }

  /** One EDIT_CELLS frame for a brush application; the batch is atomic. */
  sendEdits(cells: Array<[number, number, number]>, action: number): void {
    if (cells.length === 0) return;
    const edits: Edit[] = cells.map(([x, y, z]) => ({ x, y, z, action }));
    const msg: EditCells = { kind: "edit_cells", edits };
    this.state.editSent(cells, action);
    this.sendMessage(msg);
  }

  sendTelemetry(detail: string): void {
    this.sendMessage({ kind: "telemetry", detail });
  }

  loadScene(name: string): void {
    this.sendMessage({ kind: "load_scene", name });
  }

  setCadence(cadence: number): void {
    this.sendMessage({ kind: "set_cadence", cadence });
  }

  setParam(target: number, value: number): void {
    this.sendMessage({ kind: "set_param", target, value });
  }

  close(): void {
    this.socket.close();
  }
}

/** Cells a brush covers: size 1 is the cell, size 3 its 3x3x3 cube, clipped. */
export function brushCells(
  center: [number, number, number],
  size: 1 | 3,
  dims: Dims,
): Array<[number, number, number]> {
  if (size === 1) {
    const [x, y, z] = center;
    return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2]
      ? [center]
      : [];
  }
  const out: Array<[number, number, number]> = [];
  for (let dz = -1; dz <= 1; dz++) {
    for (let dy = -1; dy <= 1; dy++) {
      for (let dx = -1; dx <= 1; dx++) {
        const x = center[0] + dx;
        const y = center[1] + dy;
        const z = center[2] + dz;
        if (x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2]) {
          out.push([x, y, z]);
        }
      }
    }
  }
  return out;
}

function toBytes(data: unknown): Uint8Array | null {
  if (data instanceof ArrayBuffer) return new Uint8Array(data);
  if (ArrayBuffer.isView(data)) {
    return new Uint8Array(data.buffer, data.byteOffset, data.byteLength);
  }
  return null;
}
