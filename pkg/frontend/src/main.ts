/**
 * Browser entry point: wires the socket client, orbit camera, voxel
 * renderer, and toolbar into the page.  All state lives in the modules;
 * this file only routes DOM events to them and repaints when told.
 */

import { OrbitCamera } from "./camera.js";
import { SteerClient, brushCells } from "./client.js";
import { BUTTON_VERBS, ButtonName, enabledButtons, pressButton } from "./control.js";
import { VoxelRenderer } from "./gl.js";
import { pickVoxel, placementTarget } from "./picking.js";
import {
  A_EMPTY,
  A_FILL_WATER,
  A_SET_WALL,
  EV_NAMES,
  ERR_NAMES,
} from "./protocol.js";
import { buildVoxelInstances, CellSource, DISPLAY_THRESHOLD } from "./render.js";
import type { Dims } from "./snapshot.js";
import { TelemetryThrottle } from "./telemetry.js";

type Tool = "wall" | "water" | "empty";
const TOOL_ACTIONS: Record<Tool, number> = {
  wall: A_SET_WALL,
  water: A_FILL_WATER,
  empty: A_EMPTY,
};

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error("missing element #" + id);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("view");
const gl = canvas.getContext("webgl2");
if (!gl) throw new Error("WebGL2 is required");
const renderer = new VoxelRenderer(gl);
const camera = new OrbitCamera([6, 6, 8], 30);

let client: SteerClient | null = null;
let tool: Tool = "wall";
let brush: 1 | 3 = 1;
let dirty = true;

const statusEl = $("status");
const bannerEl = $("banner");
const controlButtons = new Map<ButtonName, HTMLButtonElement>();
for (const name of Object.keys(BUTTON_VERBS) as ButtonName[]) {
  controlButtons.set(name, $<HTMLButtonElement>("btn-" + name));
}

function setBanner(text: string, cls: string): void {
  bannerEl.textContent = text;
  bannerEl.className = cls;
}

function refreshToolbar(): void {
  const lifecycle = client ? client.state.lifecycle : null;
  const allowed = lifecycle ? enabledButtons(lifecycle) : null;
  for (const [name, el] of controlButtons) el.disabled = !allowed || !allowed[name];
  for (const t of Object.keys(TOOL_ACTIONS) as Tool[]) {
    $("tool-" + t).classList.toggle("active", t === tool);
  }
  $("brush-1").classList.toggle("active", brush === 1);
  $("brush-3").classList.toggle("active", brush === 3);
}

function refreshStatus(): void {
  if (!client) {
    statusEl.textContent = "disconnected";
    return;
  }
  const s = client.state;
  const [nx, ny, nz] = s.dims;
  const parts = [
    s.lifecycle,
    nx > 0 ? `${nx}×${ny}×${nz}` : "no scene",
    `t=${s.lastTimestep}`,
  ];
  const ev = s.events[s.events.length - 1];
  if (ev) parts.push(`${EV_NAMES[ev.code] ?? "event"}@${ev.timestep}`);
  statusEl.textContent = parts.join("  |  ");
}

function frameScene(dims: Dims): void {
  camera.target = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
  camera.distance = Math.max(dims[0], dims[1], dims[2]) * 1.9;
  renderer.setDomain(dims);
}

function cellSource(): CellSource | null {
  if (!client || !client.state.grid) return null;
  const s = client.state;
  return {
    dims: s.dims,
    byteAt: (x, y, z) => s.displayByte(x, y, z),
    isPending: (x, y, z) => s.overlay.has(s.grid!.index(x, y, z)),
  };
}

function repaint(): void {
  dirty = false;
  const src = cellSource();
  if (!src) {
    gl!.viewport(0, 0, canvas.width, canvas.height);
    gl!.clearColor(0.08, 0.09, 0.11, 1.0);
    gl!.clear(gl!.COLOR_BUFFER_BIT | gl!.DEPTH_BUFFER_BIT);
    return;
  }
  const instances = buildVoxelInstances(src, camera.basis().forward);
  renderer.draw(instances, camera, canvas.width, canvas.height);
}

function scheduleRepaint(): void {
  if (dirty) return;
  dirty = true;
  requestAnimationFrame(repaint);
}

function resize(): void {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = Math.round(canvas.clientWidth * dpr);
  canvas.height = Math.round(canvas.clientHeight * dpr);
  scheduleRepaint();
}
window.addEventListener("resize", resize);

// --- connection -----------------------------------------------------------

function connect(url: string): void {
  client?.close();
  client = new SteerClient(new WebSocket(url), {
    onMessage: (msg, changed) => {
      if (changed === "scene" && client!.state.dims[0] > 0) {
        frameScene(client!.state.dims);
      }
      if (msg.kind === "event") {
        const name = EV_NAMES[msg.code] ?? `event ${msg.code}`;
        const bad = name === "overflow" || name === "overbuilt" || name === "failure_registered";
        setBanner(`${name} at step ${msg.timestep}`, bad ? "bad" : "good");
      } else if (msg.kind === "error") {
        setBanner(`${ERR_NAMES[msg.code] ?? "error"}: ${msg.message}`, "bad");
      } else if (msg.kind === "violation") {
        setBanner(`protocol violation: ${msg.reason}`, "bad");
      }
      refreshStatus();
      refreshToolbar();
      scheduleRepaint();
    },
    onClose: () => {
      client = null;
      setBanner("connection closed", "bad");
      refreshStatus();
      refreshToolbar();
    },
  });
  setBanner("connecting to " + url, "good");
}

$<HTMLFormElement>("connect-form").addEventListener("submit", (e) => {
  e.preventDefault();
  connect($<HTMLInputElement>("server-url").value.trim());
});

// --- mouse: orbit / pan / zoom / edit --------------------------------------

let dragging = false;
let moved = false;
let lastX = 0;
let lastY = 0;
let panning = false;

canvas.addEventListener("contextmenu", (e) => e.preventDefault());
canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  moved = false;
  panning = e.button === 2 || e.shiftKey;
  lastX = e.clientX;
  lastY = e.clientY;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const dx = e.clientX - lastX;
  const dy = e.clientY - lastY;
  if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
  if (!moved) return;
  lastX = e.clientX;
  lastY = e.clientY;
  if (panning) {
    const scale = camera.distance * 0.0016;
    camera.pan(-dx * scale, dy * scale);
  } else {
    camera.orbit(-dx * 0.008, dy * 0.008);
  }
  sendViewpoint();
  scheduleRepaint();
});
canvas.addEventListener("pointerup", (e) => {
  if (!dragging) return;
  dragging = false;
  if (!moved && !panning) editAt(e.clientX, e.clientY);
});
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  camera.zoom(Math.exp(e.deltaY * 0.0012));
  sendViewpoint();
  scheduleRepaint();
}, { passive: false });

function editAt(clientX: number, clientY: number): void {
  if (!client || !client.state.grid) return;
  const rect = canvas.getBoundingClientRect();
  const ndcX = ((clientX - rect.left) / rect.width) * 2 - 1;
  const ndcY = 1 - ((clientY - rect.top) / rect.height) * 2;
  const aspect = rect.width / Math.max(rect.height, 1);
  const { origin, dir } = camera.viewRay(ndcX, ndcY, aspect);
  const s = client.state;
  const solid = (x: number, y: number, z: number) =>
    s.grid!.isWall(x, y, z) || s.grid!.epsAt(x, y, z) >= DISPLAY_THRESHOLD;
  const hit = pickVoxel(origin, dir, s.dims, solid);
  if (!hit) return;
  const action = TOOL_ACTIONS[tool];
  const target = placementTarget(hit, action, s.dims);
  if (!target) return;
  client.sendEdits(brushCells(target, brush, s.dims), action);
  scheduleRepaint();
}

// --- telemetry -------------------------------------------------------------

const throttle = new TelemetryThrottle((msg) => client?.sendMessage(msg));
setInterval(() => throttle.tick(), 25);

function sendViewpoint(): void {
  const [ex, ey, ez] = camera.eye();
  throttle.record(
    `view eye=(${ex.toFixed(1)},${ey.toFixed(1)},${ez.toFixed(1)}) ` +
    `az=${camera.azimuth.toFixed(2)} el=${camera.elevation.toFixed(2)}`,
  );
}

// --- toolbar ---------------------------------------------------------------

for (const [name, el] of controlButtons) {
  el.addEventListener("click", () => {
    if (!client) return;
    const msg = pressButton(name, client.state.lifecycle);
    if (msg) {
      client.sendControl(msg.verb);
      refreshToolbar();
    }
  });
}
for (const t of Object.keys(TOOL_ACTIONS) as Tool[]) {
  $("tool-" + t).addEventListener("click", () => {
    tool = t;
    refreshToolbar();
  });
}
$("brush-1").addEventListener("click", () => { brush = 1; refreshToolbar(); });
$("brush-3").addEventListener("click", () => { brush = 3; refreshToolbar(); });

$<HTMLFormElement>("scene-form").addEventListener("submit", (e) => {
  e.preventDefault();
  const name = $<HTMLInputElement>("scene-name").value.trim();
  if (client && name) client.loadScene(name);
});

$<HTMLInputElement>("cadence").addEventListener("change", (e) => {
  const v = Number((e.target as HTMLInputElement).value);
  if (client && Number.isFinite(v) && v >= 1) client.setCadence(Math.round(v));
});

resize();
refreshToolbar();
refreshStatus();
const defaultUrl = `ws://${location.hostname || "127.0.0.1"}:8765`;
$<HTMLInputElement>("server-url").value = defaultUrl;
