import { expect, it } from "vitest";
import { EPS_SCALE, WALL_BYTE } from "../src/protocol.js";
import { SceneGrid } from "../src/snapshot.js";

it("indexes x fastest", () => {
  const g = SceneGrid.empty([4, 3, 2]);
  expect(g.index(0, 0, 0)).toBe(0);
  expect(g.index(1, 0, 0)).toBe(1);
  expect(g.index(0, 1, 0)).toBe(4);
  expect(g.index(0, 0, 1)).toBe(12);
  expect(g.index(3, 2, 1)).toBe(23);
});

it("rejects a byte payload that does not match the dims", () => {
  expect(() => new SceneGrid([4, 3, 2], new Uint8Array(23))).toThrow();
  expect(() => new SceneGrid([4, 3, 2], new Uint8Array(24))).not.toThrow();
});

it("decodes wall and fill bytes", () => {
  const cells = new Uint8Array(24);
  cells[0] = WALL_BYTE;
  cells[1] = EPS_SCALE; // full
  cells[2] = 125; // half
  const g = new SceneGrid([4, 3, 2], cells);

  expect(g.isWall(0, 0, 0)).toBe(true);
  expect(g.epsAt(0, 0, 0)).toBe(0);
  expect(g.isWall(1, 0, 0)).toBe(false);
  expect(g.epsAt(1, 0, 0)).toBe(1);
  expect(g.epsAt(2, 0, 0)).toBeCloseTo(0.5);
  expect(g.epsAt(3, 0, 0)).toBe(0);
});

it("clamps stray bytes between the fill scale and the wall marker", () => {
  const cells = new Uint8Array(24);
  cells[5] = 254; // not a legal quantized fill, but must not exceed 1.0
  const g = new SceneGrid([4, 3, 2], cells);
  expect(g.epsAt(1, 1, 0)).toBe(1);
  expect(g.isWall(1, 1, 0)).toBe(false);
});

it("checks bounds", () => {
  const g = SceneGrid.empty([4, 3, 2]);
  expect(g.inBounds(0, 0, 0)).toBe(true);
  expect(g.inBounds(3, 2, 1)).toBe(true);
  expect(g.inBounds(4, 0, 0)).toBe(false);
  expect(g.inBounds(-1, 0, 0)).toBe(false);
  expect(g.inBounds(0, 3, 0)).toBe(false);
  expect(g.inBounds(0, 0, 2)).toBe(false);
});
