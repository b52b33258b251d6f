/**
 * WebGL2 voxel renderer: one instanced unit cube, two passes.
 *
 * Walls draw first with depth writes on.  Water draws after with blending
 * on and depth writes off, relying on the instance buffer already being
 * ordered far-to-near, so translucency composites correctly against both
 * the walls and other water without any per-frame sorting here.
 */

import type { OrbitCamera } from "./camera.js";
import type { Dims } from "./snapshot.js";
import type { VoxelInstances } from "./render.js";

export type Mat4 = Float32Array;

export function perspective(fovY: number, aspect: number, near: number, far: number): Mat4 {
  const f = 1 / Math.tan(fovY / 2);
  const inv = 1 / (near - far);
  // column-major
  return new Float32Array([
    f / aspect, 0, 0, 0,
    0, f, 0, 0,
    0, 0, (near + far) * inv, -1,
    0, 0, 2 * near * far * inv, 0,
  ]);
}

export function lookAt(
  eye: [number, number, number],
  target: [number, number, number],
  up: [number, number, number],
): Mat4 {
  let zx = eye[0] - target[0], zy = eye[1] - target[1], zz = eye[2] - target[2];
  const zl = Math.hypot(zx, zy, zz) || 1;
  zx /= zl; zy /= zl; zz /= zl;
  let xx = up[1] * zz - up[2] * zy;
  let xy = up[2] * zx - up[0] * zz;
  let xz = up[0] * zy - up[1] * zx;
  const xl = Math.hypot(xx, xy, xz) || 1;
  xx /= xl; xy /= xl; xz /= xl;
  const yx = zy * xz - zz * xy;
  const yy = zz * xx - zx * xz;
  const yz = zx * xy - zy * xx;
  return new Float32Array([
    xx, yx, zx, 0,
    xy, yy, zy, 0,
    xz, yz, zz, 0,
    -(xx * eye[0] + xy * eye[1] + xz * eye[2]),
    -(yx * eye[0] + yy * eye[1] + yz * eye[2]),
    -(zx * eye[0] + zy * eye[1] + zz * eye[2]),
    1,
  ]);
}

export function mat4Multiply(a: Mat4, b: Mat4): Mat4 {
  const out = new Float32Array(16);
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + r] * b[c * 4 + k];
      out[c * 4 + r] = s;
    }
  }
  return out;
}

const VERT_SRC = `#version 300 es
layout(location = 0) in vec3 aPos;
layout(location = 1) in vec3 aNormal;
layout(location = 2) in vec3 aCenter;
layout(location = 3) in vec4 aColor;
uniform mat4 uViewProj;
out vec3 vNormal;
out vec4 vColor;
void main() {
  vNormal = aNormal;
  vColor = aColor;
  gl_Position = uViewProj * vec4(aPos + aCenter, 1.0);
}
`;

const FRAG_SRC = `#version 300 es
precision mediump float;
in vec3 vNormal;
in vec4 vColor;
uniform vec3 uLightDir;
out vec4 fragColor;
void main() {
  float diffuse = max(dot(normalize(vNormal), uLightDir), 0.0);
  float shade = 0.55 + 0.45 * diffuse;
  fragColor = vec4(vColor.rgb * shade, vColor.a);
}
`;

const LINE_VERT_SRC = `#version 300 es
layout(location = 0) in vec3 aPos;
uniform mat4 uViewProj;
void main() { gl_Position = uViewProj * vec4(aPos, 1.0); }
`;

const LINE_FRAG_SRC = `#version 300 es
precision mediump float;
uniform vec4 uColor;
out vec4 fragColor;
void main() { fragColor = uColor; }
`;

// 36 vertices of a unit cube centered at the origin, position + face normal
function cubeVertices(): Float32Array {
  const faces: Array<[number[], number[]]> = [
    [[1, 0, 0], [0, 1, 0]],
    [[-1, 0, 0], [0, 0, 1]],
    [[0, 1, 0], [0, 0, 1]],
    [[0, -1, 0], [1, 0, 0]],
    [[0, 0, 1], [1, 0, 0]],
    [[0, 0, -1], [0, 1, 0]],
  ];
  const out = new Float32Array(36 * 6);
  let o = 0;
  for (const [n, t] of faces) {
    const b = [n[1] * t[2] - n[2] * t[1], n[2] * t[0] - n[0] * t[2], n[0] * t[1] - n[1] * t[0]];
    const corner = (su: number, sv: number) => [
      0.5 * (n[0] + su * t[0] + sv * b[0]),
      0.5 * (n[1] + su * t[1] + sv * b[1]),
      0.5 * (n[2] + su * t[2] + sv * b[2]),
    ];
    const quad = [corner(-1, -1), corner(1, -1), corner(1, 1), corner(-1, -1), corner(1, 1), corner(-1, 1)];
    for (const p of quad) {
      out[o++] = p[0]; out[o++] = p[1]; out[o++] = p[2];
      out[o++] = n[0]; out[o++] = n[1]; out[o++] = n[2];
    }
  }
  return out;
}

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
  const shader = gl.createShader(type)!;
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error("shader compile failed: " + gl.getShaderInfoLog(shader));
  }
  return shader;
}

function link(gl: WebGL2RenderingContext, vert: string, frag: string): WebGLProgram {
  const program = gl.createProgram()!;
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vert));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, frag));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error("program link failed: " + gl.getProgramInfoLog(program));
  }
  return program;
}

export class VoxelRenderer {
  private program: WebGLProgram;
  private lineProgram: WebGLProgram;
  private vao: WebGLVertexArrayObject;
  private instanceBuf: WebGLBuffer;
  private instanceCapacity = 0;
  private lineVao: WebGLVertexArrayObject;
  private lineCount = 0;
  private uViewProj: WebGLUniformLocation;
  private uLightDir: WebGLUniformLocation;
  private uLineViewProj: WebGLUniformLocation;
  private uLineColor: WebGLUniformLocation;

  constructor(private gl: WebGL2RenderingContext) {
    this.program = link(gl, VERT_SRC, FRAG_SRC);
    this.lineProgram = link(gl, LINE_VERT_SRC, LINE_FRAG_SRC);
    this.uViewProj = gl.getUniformLocation(this.program, "uViewProj")!;
    this.uLightDir = gl.getUniformLocation(this.program, "uLightDir")!;
    this.uLineViewProj = gl.getUniformLocation(this.lineProgram, "uViewProj")!;
    this.uLineColor = gl.getUniformLocation(this.lineProgram, "uColor")!;

    this.vao = gl.createVertexArray()!;
    gl.bindVertexArray(this.vao);

    const cubeBuf = gl.createBuffer()!;
    gl.bindBuffer(gl.ARRAY_BUFFER, cubeBuf);
    gl.bufferData(gl.ARRAY_BUFFER, cubeVertices(), gl.STATIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 24, 0);
    gl.enableVertexAttribArray(1);
    gl.vertexAttribPointer(1, 3, gl.FLOAT, false, 24, 12);

    this.instanceBuf = gl.createBuffer()!;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.instanceBuf);
    gl.enableVertexAttribArray(2);
    gl.vertexAttribPointer(2, 3, gl.FLOAT, false, 28, 0);
    gl.vertexAttribDivisor(2, 1);
    gl.enableVertexAttribArray(3);
    gl.vertexAttribPointer(3, 4, gl.FLOAT, false, 28, 12);
    gl.vertexAttribDivisor(3, 1);
    gl.bindVertexArray(null);

    this.lineVao = gl.createVertexArray()!;
    gl.clearColor(0.08, 0.09, 0.11, 1.0);
    gl.enable(gl.DEPTH_TEST);
  }

  /** Rebuild the domain outline; call whenever the grid dimensions change. */
  setDomain(dims: Dims): void {
    const gl = this.gl;
    const [nx, ny, nz] = dims;
    const c = [[0, 0, 0], [nx, 0, 0], [nx, ny, 0], [0, ny, 0],
               [0, 0, nz], [nx, 0, nz], [nx, ny, nz], [0, ny, nz]];
    const edges = [[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4],
                   [0, 4], [1, 5], [2, 6], [3, 7]];
    const pts = new Float32Array(edges.length * 6);
    let o = 0;
    for (const [a, b] of edges) {
      pts.set(c[a], o); o += 3;
      pts.set(c[b], o); o += 3;
    }
    gl.bindVertexArray(this.lineVao);
    const buf = gl.createBuffer()!;
    gl.bindBuffer(gl.ARRAY_BUFFER, buf);
    gl.bufferData(gl.ARRAY_BUFFER, pts, gl.STATIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 12, 0);
    gl.bindVertexArray(null);
    this.lineCount = edges.length * 2;
  }

  draw(instances: VoxelInstances, camera: OrbitCamera, width: number, height: number): void {
    const gl = this.gl;
    gl.viewport(0, 0, width, height);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);

    const aspect = width / Math.max(height, 1);
    const proj = perspective(camera.fovY, aspect, 0.1, 4096);
    const view = lookAt(camera.eye(), camera.target, [0, 0, 1]);
    const viewProj = mat4Multiply(proj, view);

    if (this.lineCount > 0) {
      gl.useProgram(this.lineProgram);
      gl.uniformMatrix4fv(this.uLineViewProj, false, viewProj);
      gl.uniform4f(this.uLineColor, 0.5, 0.5, 0.55, 1.0);
      gl.bindVertexArray(this.lineVao);
      gl.drawArrays(gl.LINES, 0, this.lineCount);
    }

    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.uViewProj, false, viewProj);
    gl.uniform3f(this.uLightDir, 0.49, 0.33, 0.81);
    gl.bindVertexArray(this.vao);

    if (instances.opaqueCount > 0) {
      gl.depthMask(true);
      gl.disable(gl.BLEND);
      this.uploadInstances(instances.opaque);
      gl.drawArraysInstanced(gl.TRIANGLES, 0, 36, instances.opaqueCount);
    }
    if (instances.blendedCount > 0) {
      gl.depthMask(false);
      gl.enable(gl.BLEND);
      gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
      this.uploadInstances(instances.blended);
      gl.drawArraysInstanced(gl.TRIANGLES, 0, 36, instances.blendedCount);
      gl.depthMask(true);
      gl.disable(gl.BLEND);
    }
    gl.bindVertexArray(null);
  }

  private uploadInstances(data: Float32Array): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.instanceBuf);
    if (data.length > this.instanceCapacity) {
      // grow geometrically so steady-state frames reuse the allocation
      this.instanceCapacity = Math.max(data.length, this.instanceCapacity * 2, 7 * 1024);
      gl.bufferData(gl.ARRAY_BUFFER, this.instanceCapacity * 4, gl.DYNAMIC_DRAW);
    }
    gl.bufferSubData(gl.ARRAY_BUFFER, 0, data);
  }
}
