/**
 * Camera-move telemetry, throttled.  Viewpoint records feed the server's
 * observation-time metric, but a mouse drag fires dozens of move events a
 * second; at most one record per window (100 ms) goes on the wire and the
 * latest suppressed record is sent when the window reopens, so the stream
 * ends on the true final viewpoint.
 */

import { Telemetry } from "./protocol.js";

export const WINDOW_MS = 100;

export class TelemetryThrottle {
  private lastSent = -Infinity;
  private pending: string | null = null;

  constructor(
    private send: (msg: Telemetry) => void,
    private now: () => number = () => Date.now(),
  ) {}

  /** Record one activity detail; sends it now or holds the latest. */
  record(detail: string): void {
    const t = this.now();
    if (t - this.lastSent >= WINDOW_MS) {
      this.lastSent = t;
      this.pending = null;
      this.send({ kind: "telemetry", detail });
    } else {
      this.pending = detail;
    }
  }

  /** Flush a held record once the window has reopened (call on a timer). */
  tick(): void {
    if (this.pending === null) return;
    const t = this.now();
    if (t - this.lastSent >= WINDOW_MS) {
      this.lastSent = t;
      const detail = this.pending;
      this.pending = null;
      this.send({ kind: "telemetry", detail });
    }
  }
}
