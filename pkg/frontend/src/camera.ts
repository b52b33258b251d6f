/**
 * Orbit camera: a target point, azimuth/elevation angles and a distance,
 * plus a pan offset folded into the target.  Elevation is clamped inside
 * the open interval (-90, 90) degrees so the view direction never
 * degenerates against the up axis; distance stays strictly positive.
 */

export type Vec3 = [number, number, number];

const EL_LIMIT = (Math.PI / 2) * 0.999;
const MIN_DISTANCE = 1e-3;

export function vecAdd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vecScale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vecSub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vecCross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vecNormalize(a: Vec3): Vec3 {
  const len = Math.hypot(a[0], a[1], a[2]);
  return len === 0 ? [0, 0, 0] : [a[0] / len, a[1] / len, a[2] / len];
}

export class OrbitCamera {
  target: Vec3;
  azimuth: number;
  elevation: number;
  distance: number;
  fovY: number;

  // z is the simulation's up axis, so the orbit basis is built around it
  constructor(target: Vec3, distance: number, azimuth = 0.8, elevation = 0.5) {
    this.target = target;
    this.distance = Math.max(distance, MIN_DISTANCE);
    this.azimuth = azimuth;
    this.elevation = clampElevation(elevation);
    this.fovY = Math.PI / 4;
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    this.elevation = clampElevation(this.elevation + dElevation);
  }

  zoom(factor: number): void {
    this.distance = Math.max(this.distance * factor, MIN_DISTANCE);
  }

  /** Shift the target in the screen plane; dx, dy in world units. */
  pan(dx: number, dy: number): void {
    const { right, up } = this.basis();
    this.target = vecAdd(this.target, vecAdd(vecScale(right, dx), vecScale(up, dy)));
  }

  eye(): Vec3 {
    const ce = Math.cos(this.elevation);
    return vecAdd(this.target, vecScale([
      Math.cos(this.azimuth) * ce,
      Math.sin(this.azimuth) * ce,
      Math.sin(this.elevation),
    ], this.distance));
  }

  basis(): { forward: Vec3; right: Vec3; up: Vec3 } {
    const forward = vecNormalize(vecSub(this.target, this.eye()));
    const right = vecNormalize(vecCross(forward, [0, 0, 1]));
    const up = vecCross(right, forward);
    return { forward, right, up };
  }

  /**
   * Ray through a screen point.  ndcX, ndcY in [-1, 1] with +y up; the
   * center (0, 0) looks straight at the target.
   */
  viewRay(ndcX: number, ndcY: number, aspect: number): { origin: Vec3; dir: Vec3 } {
    const { forward, right, up } = this.basis();
    const tanHalf = Math.tan(this.fovY / 2);
    const dir = vecNormalize(vecAdd(
      forward,
      vecAdd(
        vecScale(right, ndcX * aspect * tanHalf),
        vecScale(up, ndcY * tanHalf),
      ),
    ));
    return { origin: this.eye(), dir };
  }
}

export function clampElevation(elevation: number): number {
  return Math.min(Math.max(elevation, -EL_LIMIT), EL_LIMIT);
}
