/**
 * Client-side scene state: the latest complete snapshot, the lifecycle as
 * last known, pending optimistic edits, and the event feed.  The client
 * never mutates simulation truth: edits overlay locally and expire when
 * the next snapshot (which reflects the server's decision) arrives, or
 * when the server rejects the command.
 */

import {
  Decoded,
  E_SCENE_LOADED,
  E_SUCCESS,
  ERR_STABILITY_FAULT,
  T_CONTROL,
  V_PAUSE,
  V_RESTART,
  V_RESUME,
  V_START,
  V_STEP,
  V_STOP,
  WALL_BYTE,
  EPS_SCALE,
  A_EMPTY,
  A_SET_WALL,
  A_FILL_WATER,
} from "./protocol.js";
import { SceneGrid, Dims } from "./snapshot.js";

export type Lifecycle = "idle" | "running" | "paused" | "finished";

export type EventEntry = { code: number; timestep: number };
export type ErrorEntry = { code: number; message: string };

/** Byte an edit action would produce, for the optimistic overlay. */
export function actionByte(action: number): number {
  if (action === A_SET_WALL) return WALL_BYTE;
  if (action === A_FILL_WATER) return EPS_SCALE;
  if (action === A_EMPTY) return 0;
  throw new Error(`unknown action ${action}`);
}

export class ClientSceneState {
  dims: Dims = [0, 0, 0];
  dx = 0;
  dt = 0;
  grid: SceneGrid | null = null;
  lifecycle: Lifecycle = "idle";
  lastSnapshotSeq = -1;
  lastTimestep = 0;
  events: EventEntry[] = [];
  errors: ErrorEntry[] = [];
  /** flat cell index -> overlay byte, cleared on every snapshot */
  overlay = new Map<number, number>();
  private pendingControls: number[] = [];

  connected(): boolean {
    return this.dims[0] > 0;
  }

  /** Track a sent CONTROL so its ack can replay the transition locally. */
  controlSent(verb: number): void {
    this.pendingControls.push(verb);
  }

  /** Record an optimistic edit; visible until the next snapshot. */
  editSent(cells: Array<[number, number, number]>, action: number): void {
    if (!this.grid) return;
    const b = actionByte(action);
    for (const [x, y, z] of cells) {
      this.overlay.set(this.grid.index(x, y, z), b);
    }
  }

  /**
   * Fold one decoded server message in.  Returns a short description of
   * what changed so the UI layer can refresh the matching widgets.
   */
  apply(msg: Decoded): string {
    switch (msg.kind) {
      case "welcome": {
        const dimsChanged =
          msg.nx !== this.dims[0] ||
          msg.ny !== this.dims[1] ||
          msg.nz !== this.dims[2];
        this.dims = [msg.nx, msg.ny, msg.nz];
        this.dx = msg.dx;
        this.dt = msg.dt;
        if (dimsChanged) {
          // a re-WELCOME with new dims means a different grid: every cached
          // cell index is stale
          this.grid = null;
          this.overlay.clear();
          this.lastSnapshotSeq = -1;
        }
        return dimsChanged ? "scene" : "welcome";
      }
      case "snapshot": {
        this.grid = new SceneGrid(this.dims, msg.cells);
        this.lastSnapshotSeq = msg.seq;
        this.lastTimestep = msg.timestep;
        this.overlay.clear();
        return "snapshot";
      }
      case "event":
        this.events.push({ code: msg.code, timestep: msg.timestep });
        if (msg.code === E_SCENE_LOADED) this.lifecycle = "idle";
        if (msg.code === E_SUCCESS) this.lifecycle = "finished";
        return "event";
      case "ack":
        if (msg.echo === T_CONTROL) {
          const verb = this.pendingControls.shift();
          if (verb !== undefined) this.applyVerb(verb);
        }
        return "ack";
      case "error":
        this.errors.push({ code: msg.code, message: msg.message });
        // the server pauses itself on a stability fault so the user can fix
        // the scene and resume
        if (msg.code === ERR_STABILITY_FAULT) this.lifecycle = "paused";
        else this.pendingControls.shift();
        this.overlay.clear();
        return "error";
      default:
        return "ignored";
    }
  }

  private applyVerb(verb: number): void {
    if (verb === V_START && this.lifecycle === "idle") this.lifecycle = "running";
    else if (verb === V_PAUSE && this.lifecycle === "running") this.lifecycle = "paused";
    else if (verb === V_RESUME && this.lifecycle === "paused") this.lifecycle = "running";
    else if (verb === V_STOP) this.lifecycle = "idle";
    else if (verb === V_RESTART) this.lifecycle = "idle";
    else if (verb === V_STEP) {
      // single step keeps the lifecycle where it was
    }
  }

  /** Effective display byte for a cell, overlay first. */
  displayByte(x: number, y: number, z: number): number {
    if (!this.grid) return 0;
    const idx = this.grid.index(x, y, z);
    const pending = this.overlay.get(idx);
    return pending !== undefined ? pending : this.grid.cells[idx];
  }
}
