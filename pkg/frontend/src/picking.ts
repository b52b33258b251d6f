/**
 * Grid-traversal voxel picking.  World coordinates are cell units: cell
 * (x, y, z) spans the unit cube [x, x+1) x [y, y+1) x [z, z+1).  The ray
 * is clipped to the grid box first (the camera orbits outside), then
 * stepped cell by cell along tMax/tDelta so every cell pierced by the
 * ray is visited exactly once, in order.
 */

import type { Vec3 } from "./camera.js";
import type { Dims } from "./snapshot.js";
import { A_EMPTY, A_FILL_WATER, A_SET_WALL } from "./protocol.js";

export type VoxelHit = {
  cell: [number, number, number];
  /** Unit normal of the face the ray entered through; zero if the ray began inside. */
  normal: [number, number, number];
  t: number;
};

export type IsSolid = (x: number, y: number, z: number) => boolean;

export function pickVoxel(
  origin: Vec3,
  direction: Vec3,
  dims: Dims,
  isSolid: IsSolid,
): VoxelHit | null {
  const len = Math.hypot(direction[0], direction[1], direction[2]);
  if (len === 0) return null;
  const d: Vec3 = [direction[0] / len, direction[1] / len, direction[2] / len];

  // slab-clip against the grid box; remember which axis the ray enters through
  let tEnter = 0;
  let tExit = Infinity;
  let enterAxis = -1;
  let enterSign = 0;
  for (let a = 0; a < 3; a++) {
    if (d[a] === 0) {
      if (origin[a] < 0 || origin[a] > dims[a]) return null;
      continue;
    }
    let t0 = (0 - origin[a]) / d[a];
    let t1 = (dims[a] - origin[a]) / d[a];
    const sign = d[a] > 0 ? -1 : 1; // entry face normal points against travel
    if (t0 > t1) [t0, t1] = [t1, t0];
    if (t0 > tEnter) {
      tEnter = t0;
      enterAxis = a;
      enterSign = sign;
    }
    tExit = Math.min(tExit, t1);
    if (tEnter > tExit) return null;
  }

  const start = tEnter;
  let x: number, y: number, z: number;
  if (enterAxis === -1) {
    // origin already inside the box
    x = Math.floor(origin[0]);
    y = Math.floor(origin[1]);
    z = Math.floor(origin[2]);
  } else {
    const px = origin[0] + d[0] * start;
    const py = origin[1] + d[1] * start;
    const pz = origin[2] + d[2] * start;
    x = Math.floor(px);
    y = Math.floor(py);
    z = Math.floor(pz);
    // the entry coordinate lands exactly on a face; pin its cell index
    if (enterAxis === 0) x = d[0] > 0 ? 0 : dims[0] - 1;
    if (enterAxis === 1) y = d[1] > 0 ? 0 : dims[1] - 1;
    if (enterAxis === 2) z = d[2] > 0 ? 0 : dims[2] - 1;
  }
  x = Math.min(Math.max(x, 0), dims[0] - 1);
  y = Math.min(Math.max(y, 0), dims[1] - 1);
  z = Math.min(Math.max(z, 0), dims[2] - 1);

  const stepX = d[0] > 0 ? 1 : d[0] < 0 ? -1 : 0;
  const stepY = d[1] > 0 ? 1 : d[1] < 0 ? -1 : 0;
  const stepZ = d[2] > 0 ? 1 : d[2] < 0 ? -1 : 0;
  const tDeltaX = stepX === 0 ? Infinity : 1 / Math.abs(d[0]);
  const tDeltaY = stepY === 0 ? Infinity : 1 / Math.abs(d[1]);
  const tDeltaZ = stepZ === 0 ? Infinity : 1 / Math.abs(d[2]);
  const boundary = (p: number, dir: number, cell: number): number =>
    dir > 0 ? cell + 1 - p : p - cell;
  let tMaxX =
    stepX === 0 ? Infinity : start + boundary(origin[0] + d[0] * start, stepX, x) * tDeltaX;
  let tMaxY =
    stepY === 0 ? Infinity : start + boundary(origin[1] + d[1] * start, stepY, y) * tDeltaY;
  let tMaxZ =
    stepZ === 0 ? Infinity : start + boundary(origin[2] + d[2] * start, stepZ, z) * tDeltaZ;

  let normal: [number, number, number] = [0, 0, 0];
  if (enterAxis === 0) normal = [enterSign, 0, 0];
  if (enterAxis === 1) normal = [0, enterSign, 0];
  if (enterAxis === 2) normal = [0, 0, enterSign];
  let t = start;

  for (;;) {
    if (isSolid(x, y, z)) {
      return { cell: [x, y, z], normal, t };
    }
    if (tMaxX <= tMaxY && tMaxX <= tMaxZ) {
      x += stepX;
      t = tMaxX;
      tMaxX += tDeltaX;
      normal = [-stepX, 0, 0];
      if (x < 0 || x >= dims[0]) return null;
    } else if (tMaxY <= tMaxZ) {
      y += stepY;
      t = tMaxY;
      tMaxY += tDeltaY;
      normal = [0, -stepY, 0];
      if (y < 0 || y >= dims[1]) return null;
    } else {
      z += stepZ;
      t = tMaxZ;
      tMaxZ += tDeltaZ;
      normal = [0, 0, -stepZ];
      if (z < 0 || z >= dims[2]) return null;
    }
    if (t > tExit + 1e-12) return null;
  }
}

/**
 * Cell a tool edits for a given hit.  Empty targets the hit cell itself;
 * Fill and Wall target the empty cell in front of the hit face (placement
 * builds against a surface).  Null when that cell does not exist: the ray
 * began inside a solid (no face) or the face borders the outside.
 */
export function placementTarget(
  hit: VoxelHit,
  action: number,
  dims: Dims,
): [number, number, number] | null {
  if (action === A_EMPTY) return hit.cell;
  if (action !== A_SET_WALL && action !== A_FILL_WATER) return null;
  const [nx, ny, nz] = hit.normal;
  if (nx === 0 && ny === 0 && nz === 0) return null;
  const c: [number, number, number] = [
    hit.cell[0] + nx,
    hit.cell[1] + ny,
    hit.cell[2] + nz,
  ];
  if (
    c[0] < 0 || c[0] >= dims[0] ||
    c[1] < 0 || c[1] >= dims[1] ||
    c[2] < 0 || c[2] >= dims[2]
  ) {
    return null;
  }
  return c;
}
