/**
 * Decoded snapshot store.  Cell bytes travel x fastest: flat index
 * x + nx * (y + ny * z).  255 marks a wall, 0..250 quantize the fill
 * fraction as round(eps * 250).
 */

import { EPS_SCALE, WALL_BYTE } from "./protocol.js";

export type Dims = readonly [number, number, number];

export class SceneGrid {
  readonly dims: Dims;
  readonly cells: Uint8Array;

  constructor(dims: Dims, cells: Uint8Array) {
    const [nx, ny, nz] = dims;
    if (cells.length !== nx * ny * nz) {
      throw new Error(`${cells.length} cell bytes for dims ${nx}x${ny}x${nz}`);
    }
    this.dims = dims;
    this.cells = cells;
  }

  static empty(dims: Dims): SceneGrid {
    return new SceneGrid(dims, new Uint8Array(dims[0] * dims[1] * dims[2]));
  }

  index(x: number, y: number, z: number): number {
    return x + this.dims[0] * (y + this.dims[1] * z);
  }

  inBounds(x: number, y: number, z: number): boolean {
    return (
      x >= 0 && x < this.dims[0] &&
      y >= 0 && y < this.dims[1] &&
      z >= 0 && z < this.dims[2]
    );
  }

  byteAt(x: number, y: number, z: number): number {
    return this.cells[this.index(x, y, z)];
  }

  isWall(x: number, y: number, z: number): boolean {
    return this.byteAt(x, y, z) === WALL_BYTE;
  }

  /** Fill fraction in [0, 1]; walls report 0 (use isWall for those). */
  epsAt(x: number, y: number, z: number): number {
    const b = this.byteAt(x, y, z);
    return b === WALL_BYTE ? 0 : Math.min(b, EPS_SCALE) / EPS_SCALE;
  }
}
