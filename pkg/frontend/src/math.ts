/** Camera math for plane rendering: small, allocation-light vector helpers.
 *
 * Conventions match the bundle producer: camera frame x right / y down /
 * z forward, pose stored camera-to-world (rotation columns are camera
 * axes, translation is the camera center), pixel centers at integers.
 */

export type Vec3 = [number, number, number];

export interface CameraPose {
  widthPx: number;
  heightPx: number;
  focalPx: number;
  cx: number;
  cy: number;
  /** row-major camera-to-world rotation */
  rotation: number[];
  /** camera center in world coordinates */
  center: Vec3;
}

export function cameraFromRecord(rec: number[]): CameraPose {
  return {
    widthPx: rec[0],
    heightPx: rec[1],
    focalPx: rec[2],
    cx: rec[3],
    cy: rec[4],
    rotation: rec.slice(5, 14),
    center: [rec[14], rec[15], rec[16]],
  };
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

export function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  return n > 0 ? scale(a, 1 / n) : [0, 0, 0];
}

/** Apply a row-major 3x3 to a vector. */
export function mat3Apply(m: number[], v: Vec3): Vec3 {
  return [
    m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
    m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
    m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
  ];
}

/** Rotation columns as camera axes in world coordinates. */
export function cameraAxis(pose: CameraPose, axis: 0 | 1 | 2): Vec3 {
  const r = pose.rotation;
  return [r[axis], r[3 + axis], r[6 + axis]];
}

/** Camera-to-world point transform. */
export function cameraToWorld(pose: CameraPose, p: Vec3): Vec3 {
  return add(mat3Apply(pose.rotation, p) as Vec3, pose.center);
}

/** World corners of the plane quad at the given disparity.
 *
 * The quad spans pixel coordinates [-0.5, W-0.5] x [-0.5, H-0.5] (texel
 * edges), so texture coordinate (0,0)/(1,1) corners align linear GL
 * sampling with pixel-center bilinear sampling.  Order: top-left,
 * top-right, bottom-left, bottom-right.
 */
export function planeCornersWorld(pose: CameraPose, disparity: number): Vec3[] {
  const depth = disparity > 0 ? 1.0 / disparity : 1e9;
  const corners: Vec3[] = [];
  for (const [u, v] of [
    [-0.5, -0.5],
    [pose.widthPx - 0.5, -0.5],
    [-0.5, pose.heightPx - 0.5],
    [pose.widthPx - 0.5, pose.heightPx - 0.5],
  ]) {
    const cam: Vec3 = [
      ((u - pose.cx) / pose.focalPx) * depth,
      ((v - pose.cy) / pose.focalPx) * depth,
      depth,
    ];
    corners.push(cameraToWorld(pose, cam));
  }
  return corners;
}

/** World-to-camera (view) matrix as a column-major 4x4 for WebGL. */
export function viewMatrix(pose: CameraPose): Float32Array {
  const r = pose.rotation; // world->camera is the transpose
  const c = pose.center;
  const tx = -(r[0] * c[0] + r[3] * c[1] + r[6] * c[2]);
  const ty = -(r[1] * c[0] + r[4] * c[1] + r[7] * c[2]);
  const tz = -(r[2] * c[0] + r[5] * c[1] + r[8] * c[2]);
  // column-major layout
  return new Float32Array([
    r[0], r[1], r[2], 0,
    r[3], r[4], r[5], 0,
    r[6], r[7], r[8], 0,
    tx, ty, tz, 1,
  ]);
}

/** Pinhole projection to clip space (w = camera z, image y down -> NDC y up). */
export function projectionMatrix(pose: CameraPose, near = 0.05, far = 500.0): Float32Array {
  const ax = (2 * pose.focalPx) / pose.widthPx;
  const bx = (2 * pose.cx) / pose.widthPx - 1;
  const ay = (-2 * pose.focalPx) / pose.heightPx;
  const by = 1 - (2 * pose.cy) / pose.heightPx;
  const zz = (far + near) / (far - near);
  const zw = (-2 * far * near) / (far - near);
  return new Float32Array([
    ax, 0, 0, 0,
    0, ay, 0, 0,
    bx, by, zz, 1,
    0, 0, zw, 0,
  ]);
}

/** Project a world point through view+projection; returns pixel coordinates. */
export function projectToPixel(pose: CameraPose, p: Vec3): { u: number; v: number; z: number } {
  const rel = sub(p, pose.center);
  const r = pose.rotation;
  const x = r[0] * rel[0] + r[3] * rel[1] + r[6] * rel[2];
  const y = r[1] * rel[0] + r[4] * rel[1] + r[7] * rel[2];
  const z = r[2] * rel[0] + r[5] * rel[1] + r[8] * rel[2];
  return { u: pose.cx + (pose.focalPx * x) / z, v: pose.cy + (pose.focalPx * y) / z, z };
}

/** Camera-to-world rotation (row-major) looking from eye toward focus.
 *
 * ``down`` is the world direction image-v should grow toward (camera y).
 */
export function lookAtRotation(eye: Vec3, focus: Vec3, down: Vec3): number[] {
  const zc = normalize(sub(focus, eye));
  let yc = sub(down, scale(zc, dot(down, zc)));
  if (norm(yc) < 1e-9) yc = [0, 1, 0];
  yc = normalize(yc);
  const xc = cross(yc, zc); // columns [x y z] orthonormal, det +1
  return [xc[0], yc[0], zc[0], xc[1], yc[1], zc[1], xc[2], yc[2], zc[2]];
}
