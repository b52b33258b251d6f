/**
 * Voxel instance building: turns the current cell bytes plus the
 * optimistic overlay into per-voxel instance data for the blocky
 * renderer.  Walls go in an opaque list; water goes in a blended list
 * emitted far-to-near (each axis iterated against the view direction's
 * sign, which orders any pair of cells on a view ray back before front),
 * so alpha compositing is correct without a per-frame sort.
 *
 * Stride is 7 floats per instance: center x, y, z, then rgba.
 */

import { WALL_BYTE, EPS_SCALE } from "./protocol.js";
import type { Dims } from "./snapshot.js";
import type { Vec3 } from "./camera.js";

export const DISPLAY_THRESHOLD = 0.1;

export const WALL_COLOR = [0.42, 0.45, 0.5] as const;
export const WATER_COLOR = [0.18, 0.45, 0.85] as const;
export const OVERLAY_COLOR = [0.95, 0.75, 0.2] as const;

export const STRIDE = 7;

export type VoxelInstances = {
  opaque: Float32Array;
  opaqueCount: number;
  blended: Float32Array;
  blendedCount: number;
};

export type CellSource = {
  dims: Dims;
  /** effective byte per cell, overlay already folded in */
  byteAt(x: number, y: number, z: number): number;
  /** whether the cell's byte comes from a pending optimistic edit */
  isPending(x: number, y: number, z: number): boolean;
};

export function buildVoxelInstances(src: CellSource, viewDir: Vec3): VoxelInstances {
  const [nx, ny, nz] = src.dims;
  const n = nx * ny * nz;
  const opaque = new Float32Array(n * STRIDE);
  const blended = new Float32Array(n * STRIDE);
  let oi = 0;
  let bi = 0;
  const minByte = Math.ceil(DISPLAY_THRESHOLD * EPS_SCALE);

  const [x0, x1, dxs] = viewDir[0] > 0 ? [nx - 1, -1, -1] : [0, nx, 1];
  const [y0, y1, dys] = viewDir[1] > 0 ? [ny - 1, -1, -1] : [0, ny, 1];
  const [z0, z1, dzs] = viewDir[2] > 0 ? [nz - 1, -1, -1] : [0, nz, 1];

  for (let z = z0; z !== z1; z += dzs) {
    for (let y = y0; y !== y1; y += dys) {
      for (let x = x0; x !== x1; x += dxs) {
        const b = src.byteAt(x, y, z);
        const pending = src.isPending(x, y, z);
        if (b === WALL_BYTE) {
          const [r, g, bl] = pending ? OVERLAY_COLOR : WALL_COLOR;
          opaque[oi] = x + 0.5;
          opaque[oi + 1] = y + 0.5;
          opaque[oi + 2] = z + 0.5;
          opaque[oi + 3] = r;
          opaque[oi + 4] = g;
          opaque[oi + 5] = bl;
          opaque[oi + 6] = 1;
          oi += STRIDE;
        } else if (b >= minByte) {
          const eps = Math.min(b, EPS_SCALE) / EPS_SCALE;
          const [r, g, bl] = pending ? OVERLAY_COLOR : WATER_COLOR;
          blended[bi] = x + 0.5;
          blended[bi + 1] = y + 0.5;
          blended[bi + 2] = z + 0.5;
          blended[bi + 3] = r;
          blended[bi + 4] = g;
          blended[bi + 5] = bl;
          blended[bi + 6] = pending ? 0.85 : eps;
          bi += STRIDE;
        }
      }
    }
  }
  return {
    opaque: opaque.subarray(0, oi),
    opaqueCount: oi / STRIDE,
    blended: blended.subarray(0, bi),
    blendedCount: bi / STRIDE,
  };
}
