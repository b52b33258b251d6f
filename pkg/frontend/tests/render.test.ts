import { expect, it } from "vitest";
import type { Vec3 } from "../src/camera.js";
import { EPS_SCALE, WALL_BYTE } from "../src/protocol.js";
import {
  CellSource,
  DISPLAY_THRESHOLD,
  OVERLAY_COLOR,
  STRIDE,
  WALL_COLOR,
  WATER_COLOR,
  buildVoxelInstances,
} from "../src/render.js";
import type { Dims } from "../src/snapshot.js";

function gridSource(
  dims: Dims,
  bytes: Map<string, number>,
  pending = new Set<string>(),
): CellSource {
  return {
    dims,
    byteAt: (x, y, z) => bytes.get(`${x},${y},${z}`) ?? 0,
    isPending: (x, y, z) => pending.has(`${x},${y},${z}`),
  };
}

const VIEW: Vec3 = [0.3, -0.5, -0.8];

it("walls are opaque, water is blended with alpha equal to its fill", () => {
  const src = gridSource(
    [4, 4, 4],
    new Map([
      ["1,1,1", WALL_BYTE],
      ["2,1,1", EPS_SCALE],
      ["2,2,1", 125],
    ]),
  );
  const out = buildVoxelInstances(src, VIEW);
  expect(out.opaqueCount).toBe(1);
  expect(out.blendedCount).toBe(2);

  const wall = Array.from(out.opaque.subarray(0, STRIDE));
  const expected = [1.5, 1.5, 1.5, ...WALL_COLOR, 1];
  for (let i = 0; i < STRIDE; i++) {
    expect(wall[i]).toBeCloseTo(expected[i], 5); // instance data is float32
  }
  const alphas = [out.blended[6], out.blended[STRIDE + 6]].sort((a, b) => a - b);
  expect(alphas[0]).toBeCloseTo(0.5);
  expect(alphas[1]).toBeCloseTo(1.0);
  expect(out.blended[3]).toBeCloseTo(WATER_COLOR[0]);
});

it("nearly empty cells draw nothing", () => {
  const minByte = Math.ceil(DISPLAY_THRESHOLD * EPS_SCALE);
  const src = gridSource(
    [3, 3, 3],
    new Map([
      ["0,0,0", minByte - 1],
      ["1,0,0", minByte],
    ]),
  );
  const out = buildVoxelInstances(src, VIEW);
  expect(out.opaqueCount).toBe(0);
  expect(out.blendedCount).toBe(1);
  expect(out.blended[0]).toBe(1.5);
});

it("pending edits render in the overlay colour", () => {
  const src = gridSource(
    [3, 3, 3],
    new Map([
      ["0,0,0", WALL_BYTE],
      ["1,0,0", EPS_SCALE],
    ]),
    new Set(["0,0,0", "1,0,0"]),
  );
  const out = buildVoxelInstances(src, VIEW);
  expect(out.opaque.slice(3, 6)).toEqual(new Float32Array(OVERLAY_COLOR));
  expect(out.blended.slice(3, 6)).toEqual(new Float32Array(OVERLAY_COLOR));
  expect(out.blended[6]).toBeCloseTo(0.85);
});

it("emits water far-to-near along a look axis", () => {
  const src = gridSource(
    [8, 2, 2],
    new Map([
      ["2,0,0", 200],
      ["5,0,0", 200],
    ]),
  );
  // looking along +x: the x=5 cell is behind the x=2 cell, draw it first
  const fwd = buildVoxelInstances(src, [1, 0, 0]);
  expect([fwd.blended[0], fwd.blended[STRIDE]]).toEqual([5.5, 2.5]);
  const back = buildVoxelInstances(src, [-1, 0, 0]);
  expect([back.blended[0], back.blended[STRIDE]]).toEqual([2.5, 5.5]);
});

it("never draws a cell after one it occludes", () => {
  // dominance property: in the emitted order, no later cell sits weakly
  // farther than an earlier one on every axis (those pairs are exactly the
  // ones a view ray can thread in sequence)
  const dims: Dims = [4, 4, 4];
  const bytes = new Map<string, number>();
  for (let z = 0; z < 4; z++) {
    for (let y = 0; y < 4; y++) {
      for (let x = 0; x < 4; x++) {
        if ((x + 2 * y + 3 * z) % 3 === 0) bytes.set(`${x},${y},${z}`, 200);
      }
    }
  }
  const views: Vec3[] = [
    [1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1],
    [-1, -1, 1], [-1, 1, -1], [1, -1, -1], [-1, -1, -1],
    [0.2, -0.9, 0.4],
  ];
  for (const view of views) {
    const out = buildVoxelInstances(gridSource(dims, bytes), view);
    const centers: number[][] = [];
    for (let i = 0; i < out.blendedCount; i++) {
      centers.push([
        out.blended[i * STRIDE],
        out.blended[i * STRIDE + 1],
        out.blended[i * STRIDE + 2],
      ]);
    }
    for (let i = 0; i < centers.length; i++) {
      for (let j = i + 1; j < centers.length; j++) {
        let allWeaklyFarther = true;
        let anyStrictly = false;
        for (let a = 0; a < 3; a++) {
          const d = (centers[j][a] - centers[i][a]) * Math.sign(view[a]);
          if (d < 0) allWeaklyFarther = false;
          if (d > 0) anyStrictly = true;
        }
        expect(
          allWeaklyFarther && anyStrictly,
          `view ${view}: ${centers[j]} drawn after ${centers[i]}`,
        ).toBe(false);
      }
    }
  }
});

it("builds a production-size grid inside a frame budget", () => {
  const dims: Dims = [30, 30, 96];
  const n = dims[0] * dims[1] * dims[2];
  const cells = new Uint8Array(n);
  // walls on the shell, water in the lower half: the worst realistic mix
  for (let z = 0; z < dims[2]; z++) {
    for (let y = 0; y < dims[1]; y++) {
      for (let x = 0; x < dims[0]; x++) {
        const i = x + dims[0] * (y + dims[1] * z);
        if (x === 0 || y === 0 || z === 0 || x === 29 || y === 29 || z === 95) {
          cells[i] = WALL_BYTE;
        } else if (z < 48) {
          cells[i] = EPS_SCALE;
        }
      }
    }
  }
  const src: CellSource = {
    dims,
    byteAt: (x, y, z) => cells[x + dims[0] * (y + dims[1] * z)],
    isPending: () => false,
  };

  buildVoxelInstances(src, VIEW); // warm up
  let best = Infinity;
  for (let rep = 0; rep < 5; rep++) {
    const t0 = performance.now();
    const out = buildVoxelInstances(src, VIEW);
    best = Math.min(best, performance.now() - t0);
    expect(out.opaqueCount + out.blendedCount).toBeGreaterThan(40000);
  }
  expect(best).toBeLessThan(33);
});
