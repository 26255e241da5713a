/** WebGL2 renderer: one premultiplied framebuffer per selected MPI (planes
 * drawn as textured quads, strictly far to near), then a fragment pass that
 * normalizes the weighted sum by the accumulated alpha mass. */

import { COVERAGE_EPS, NeighborWeight, selectNeighbors } from "./blend.js";
import { LoadedBundle } from "./loader.js";
import {
  CameraPose,
  planeCornersWorld,
  projectionMatrix,
  viewMatrix,
} from "./math.js";

const MAX_BLEND = 5;

const PLANE_VS = `#version 300 es
layout(location = 0) in vec3 a_position;
layout(location = 1) in vec2 a_texcoord;
uniform mat4 u_view;
uniform mat4 u_proj;
out vec2 v_texcoord;
void main() {
  v_texcoord = a_texcoord;
  gl_Position = u_proj * u_view * vec4(a_position, 1.0);
}
`;

const PLANE_FS = `#version 300 es
precision highp float;
in vec2 v_texcoord;
uniform sampler2D u_texture;
out vec4 o_color;
void main() {
  vec4 straight = texture(u_texture, v_texcoord);
  o_color = vec4(straight.rgb * straight.a, straight.a); // premultiply
}
`;

const BLEND_VS = `#version 300 es
out vec2 v_uv;
void main() {
  // fullscreen triangle
  vec2 p = vec2(float((gl_VertexID << 1) & 2), float(gl_VertexID & 2));
  v_uv = p;
  gl_Position = vec4(p * 2.0 - 1.0, 0.0, 1.0);
}
`;

const BLEND_FS = `#version 300 es
precision highp float;
in vec2 v_uv;
uniform sampler2D u_layers[${MAX_BLEND}];
uniform float u_weights[${MAX_BLEND}];
uniform int u_count;
uniform int u_coverage_mode;   // 1: write fallback mask instead of color
out vec4 o_color;
void main() {
  vec4 acc = vec4(0.0);
  float w_sum = 0.0;
  for (int i = 0; i < ${MAX_BLEND}; i++) {
    if (i >= u_count) { break; }
    vec4 layer = vec4(0.0);
    if (i == 0) { layer = texture(u_layers[0], v_uv); }
    else if (i == 1) { layer = texture(u_layers[1], v_uv); }
    else if (i == 2) { layer = texture(u_layers[2], v_uv); }
    else if (i == 3) { layer = texture(u_layers[3], v_uv); }
    else { layer = texture(u_layers[4], v_uv); }
    acc += u_weights[i] * layer;
    w_sum += u_weights[i];
  }
  bool fallback = acc.a < ${COVERAGE_EPS.toExponential()};
  float denom = fallback ? w_sum : acc.a;
  if (u_coverage_mode == 1) {
    o_color = vec4(fallback ? 1.0 : 0.0, 0.0, 0.0, 1.0);
  } else {
    o_color = vec4(acc.rgb / denom, 1.0);
  }
}
`;

function compile(gl: WebGL2RenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type);
  if (!shader) throw new Error("cannot create shader");
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

function link(gl: WebGL2RenderingContext, vs: string, fs: string): WebGLProgram {
  const program = gl.createProgram();
  if (!program) throw new Error("cannot create program");
  gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(program);
  if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
  }
  return program;
}

interface MpiResources {
  pose: CameraPose;
  disparities: number[];
  textures: WebGLTexture[];
  /** one quad VAO per plane, far to near */
  vaos: WebGLVertexArrayObject[];
}

interface Target {
  framebuffer: WebGLFramebuffer;
  texture: WebGLTexture;
}

export interface FrameStats {
  neighbors: NeighborWeight[];
  planesDrawn: number;
}

export class Renderer {
  private readonly gl: WebGL2RenderingContext;
  private readonly planeProgram: WebGLProgram;
  private readonly blendProgram: WebGLProgram;
  private readonly mpis: MpiResources[] = [];
  private targets: Target[] = [];
  private coverageTarget: Target | null = null;
  private readonly coverageSize = 48;
  private width = 0;
  private height = 0;

  constructor(canvas: HTMLCanvasElement, private readonly bundle: LoadedBundle) {
    const gl = canvas.getContext("webgl2", { antialias: false, alpha: false });
    if (!gl) throw new Error("WebGL2 is not available");
    this.gl = gl;
    this.planeProgram = link(gl, PLANE_VS, PLANE_FS);
    this.blendProgram = link(gl, BLEND_VS, BLEND_FS);
    this.width = bundle.manifest.width_px;
    this.height = bundle.manifest.height_px;
    canvas.width = this.width;
    canvas.height = this.height;
    this.upload();
    this.allocateTargets();
  }

  private upload(): void {
    const gl = this.gl;
    for (const mpi of this.bundle.mpis) {
      const textures: WebGLTexture[] = [];
      const vaos: WebGLVertexArrayObject[] = [];
      mpi.planes.forEach((image, d) => {
        const tex = gl.createTexture()!;
        gl.bindTexture(gl.TEXTURE_2D, tex);
        gl.pixelStorei(gl.UNPACK_PREMULTIPLY_ALPHA_WEBGL, false);
        gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGBA8, gl.RGBA, gl.UNSIGNED_BYTE, image);
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.LINEAR);
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.LINEAR);
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
        gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
        textures.push(tex);

        const corners = planeCornersWorld(mpi.pose, mpi.disparities[d]);
        // two triangles: TL TR BL / BL TR BR, texcoords at texel edges
        const vertices = new Float32Array([
          ...corners[0], 0, 0, ...corners[1], 1, 0, ...corners[2], 0, 1,
          ...corners[2], 0, 1, ...corners[1], 1, 0, ...corners[3], 1, 1,
        ]);
        const vao = gl.createVertexArray()!;
        gl.bindVertexArray(vao);
        const vbo = gl.createBuffer()!;
        gl.bindBuffer(gl.ARRAY_BUFFER, vbo);
        gl.bufferData(gl.ARRAY_BUFFER, vertices, gl.STATIC_DRAW);
        gl.enableVertexAttribArray(0);
        gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 20, 0);
        gl.enableVertexAttribArray(1);
        gl.vertexAttribPointer(1, 2, gl.FLOAT, false, 20, 12);
        vaos.push(vao);
      });
      this.mpis.push({
        pose: mpi.pose,
        disparities: mpi.disparities,
        textures,
        vaos,
      });
    }
    gl.bindVertexArray(null);
  }

  private makeTarget(width: number, height: number): Target {
    const gl = this.gl;
    const texture = gl.createTexture()!;
    gl.bindTexture(gl.TEXTURE_2D, texture);
    gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGBA8, width, height, 0, gl.RGBA,
                  gl.UNSIGNED_BYTE, null);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    const framebuffer = gl.createFramebuffer()!;
    gl.bindFramebuffer(gl.FRAMEBUFFER, framebuffer);
    gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0, gl.TEXTURE_2D,
                            texture, 0);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    return { framebuffer, texture };
  }

  private allocateTargets(): void {
    for (let i = 0; i < MAX_BLEND; i++) {
      this.targets.push(this.makeTarget(this.width, this.height));
    }
    this.coverageTarget = this.makeTarget(this.coverageSize, this.coverageSize);
  }

  /** Render one MPI into the indexed offscreen target, planes far to near. */
  private renderMpiPass(slot: number, mpiIndex: number, camera: CameraPose): number {
    const gl = this.gl;
    const mpi = this.mpis[mpiIndex];
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.targets[slot].framebuffer);
    gl.viewport(0, 0, this.width, this.height);
    gl.clearColor(0, 0, 0, 0);
    gl.clear(gl.COLOR_BUFFER_BIT);
    gl.disable(gl.DEPTH_TEST);
    gl.enable(gl.BLEND);
    // premultiplied over, color and alpha alike
    gl.blendFuncSeparate(gl.ONE, gl.ONE_MINUS_SRC_ALPHA, gl.ONE, gl.ONE_MINUS_SRC_ALPHA);

    gl.useProgram(this.planeProgram);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.planeProgram, "u_view"), false,
                        viewMatrix(camera));
    gl.uniformMatrix4fv(gl.getUniformLocation(this.planeProgram, "u_proj"), false,
                        projectionMatrix(camera));
    gl.uniform1i(gl.getUniformLocation(this.planeProgram, "u_texture"), 0);
    gl.activeTexture(gl.TEXTURE0);
    for (let d = 0; d < mpi.vaos.length; d++) {  // index 0 is farthest
      gl.bindTexture(gl.TEXTURE_2D, mpi.textures[d]);
      gl.bindVertexArray(mpi.vaos[d]);
      gl.drawArrays(gl.TRIANGLES, 0, 6);
    }
    gl.bindVertexArray(null);
    return mpi.vaos.length;
  }

  private blendPass(weights: number[], count: number,
                    framebuffer: WebGLFramebuffer | null,
                    width: number, height: number, coverageMode: boolean): void {
    const gl = this.gl;
    gl.bindFramebuffer(gl.FRAMEBUFFER, framebuffer);
    gl.viewport(0, 0, width, height);
    gl.disable(gl.BLEND);
    gl.useProgram(this.blendProgram);
    for (let i = 0; i < count; i++) {
      gl.activeTexture(gl.TEXTURE0 + i);
      gl.bindTexture(gl.TEXTURE_2D, this.targets[i].texture);
      gl.uniform1i(gl.getUniformLocation(this.blendProgram, `u_layers[${i}]`), i);
    }
    const padded = new Float32Array(MAX_BLEND);
    padded.set(weights.slice(0, count));
    gl.uniform1fv(gl.getUniformLocation(this.blendProgram, "u_weights"), padded);
    gl.uniform1i(gl.getUniformLocation(this.blendProgram, "u_count"), count);
    gl.uniform1i(gl.getUniformLocation(this.blendProgram, "u_coverage_mode"),
                 coverageMode ? 1 : 0);
    gl.drawArrays(gl.TRIANGLES, 0, 3);
  }

  /** Render a frame for the given virtual camera.  Pure in (bundle, camera). */
  frame(camera: CameraPose): FrameStats {
    const blend = this.bundle.manifest.blend;
    const gamma = blend.gamma ?? 0;
    const neighbors = selectNeighbors(camera.center,
                                      this.mpis.map((m) => m.pose),
                                      gamma, Math.min(blend.neighbors, MAX_BLEND));
    let planesDrawn = 0;
    neighbors.forEach((n, slot) => {
      planesDrawn += this.renderMpiPass(slot, n.index, camera);
    });
    this.blendPass(neighbors.map((n) => n.weight), neighbors.length, null,
                   this.width, this.height, false);
    return { neighbors, planesDrawn };
  }

  /** Fraction of pixels that hit the epsilon fallback (no opacity anywhere).
   * Re-runs the blend pass at reduced resolution and reads it back; call
   * sparingly (the HUD samples every ~30 frames). */
  coverageFallbackFraction(camera: CameraPose): number {
    const blend = this.bundle.manifest.blend;
    const neighbors = selectNeighbors(camera.center,
                                      this.mpis.map((m) => m.pose),
                                      blend.gamma ?? 0,
                                      Math.min(blend.neighbors, MAX_BLEND));
    neighbors.forEach((n, slot) => this.renderMpiPass(slot, n.index, camera));
    const gl = this.gl;
    const size = this.coverageSize;
    this.blendPass(neighbors.map((n) => n.weight), neighbors.length,
                   this.coverageTarget!.framebuffer, size, size, true);
    const pixels = new Uint8Array(size * size * 4);
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.coverageTarget!.framebuffer);
    gl.readPixels(0, 0, size, size, gl.RGBA, gl.UNSIGNED_BYTE, pixels);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    let count = 0;
    for (let i = 0; i < size * size; i++) {
      if (pixels[i * 4] > 127) count++;
    }
    return count / (size * size);
  }
}
