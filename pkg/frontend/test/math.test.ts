import { describe, expect, it } from "vitest";

import {
  cameraFromRecord,
  lookAtRotation,
  planeCornersWorld,
  projectionMatrix,
  projectToPixel,
  Vec3,
  viewMatrix,
} from "../src/math.js";

function identityCamera(x = 0, y = 0, z = 0) {
  return cameraFromRecord([
    100, 80, 100.0, 50.0, 40.0,
    1, 0, 0, 0, 1, 0, 0, 0, 1,
    x, y, z,
  ]);
}

function applyMat4(m: Float32Array, v: [number, number, number, number]) {
  const out = [0, 0, 0, 0];
  for (let row = 0; row < 4; row++) {
    out[row] = m[row] * v[0] + m[4 + row] * v[1] + m[8 + row] * v[2] + m[12 + row] * v[3];
  }
  return out;
}

describe("cameraFromRecord", () => {
  it("unpacks the 17-field pose record", () => {
    const cam = identityCamera(0.25, -0.5, 1.0);
    expect(cam.widthPx).toBe(100);
    expect(cam.focalPx).toBe(100.0);
    expect(cam.center).toEqual([0.25, -0.5, 1.0]);
    expect(cam.rotation).toEqual([1, 0, 0, 0, 1, 0, 0, 0, 1]);
  });
});

describe("planeCornersWorld", () => {
  it("unprojects texel-edge corners to the plane depth", () => {
    const cam = identityCamera();
    const corners = planeCornersWorld(cam, 0.5); // depth 2 m
    // top-left texel edge: pixel (-0.5, -0.5)
    expect(corners[0][0]).toBeCloseTo(((-0.5 - 50) / 100) * 2, 12);
    expect(corners[0][1]).toBeCloseTo(((-0.5 - 40) / 100) * 2, 12);
    expect(corners[0][2]).toBeCloseTo(2.0, 12);
    // bottom-right texel edge: pixel (99.5, 79.5)
    expect(corners[3][0]).toBeCloseTo(((99.5 - 50) / 100) * 2, 12);
    expect(corners[3][2]).toBeCloseTo(2.0, 12);
  });

  it("projects back to the same pixels from a shifted camera", () => {
    const cam = identityCamera();
    const target = identityCamera(0.1, 0, 0);
    const corners = planeCornersWorld(cam, 0.5);
    const { u, v } = projectToPixel(target, corners[0] as Vec3);
    // 5 px parallax at depth 2 m for a 0.1 m baseline at focal 100
    expect(u).toBeCloseTo(-0.5 - 5.0, 9);
    expect(v).toBeCloseTo(-0.5, 9);
  });
});

describe("view and projection matrices", () => {
  it("agree with the scalar pinhole projection", () => {
    const cam = cameraFromRecord([
      100, 80, 120.0, 48.0, 41.0,
      // modest rotation about y (9 deg), orthonormal to float precision
      0.98768834, 0, 0.15643447, 0, 1, 0, -0.15643447, 0, 0.98768834,
      0.2, -0.1, 0.05,
    ]);
    const world: Vec3 = [0.4, 0.2, 2.5];
    const view = viewMatrix(cam);
    const proj = projectionMatrix(cam);
    const eye = applyMat4(view, [...world, 1] as [number, number, number, number]);
    const clip = applyMat4(proj, eye as [number, number, number, number]);
    const ndcX = clip[0] / clip[3];
    const ndcY = clip[1] / clip[3];
    const scalar = projectToPixel(cam, world);
    // matrices are Float32Array: expect float32-level agreement
    expect(ndcX).toBeCloseTo((2 * scalar.u) / 100 - 1, 5);
    expect(ndcY).toBeCloseTo(1 - (2 * scalar.v) / 80, 5);
    expect(clip[3]).toBeCloseTo(scalar.z, 5);
  });
});

describe("lookAtRotation", () => {
  it("builds an orthonormal camera-to-world frame facing the focus", () => {
    const rot = lookAtRotation([0, 0, -2], [0.3, -0.2, 1.0], [0, 1, 0]);
    // columns are camera axes; z column points from eye to focus
    const z: Vec3 = [rot[2], rot[5], rot[8]];
    const dir: Vec3 = [0.3, -0.2, 3.0];
    const n = Math.hypot(...dir);
    expect(z[0]).toBeCloseTo(dir[0] / n, 9);
    expect(z[1]).toBeCloseTo(dir[1] / n, 9);
    expect(z[2]).toBeCloseTo(dir[2] / n, 9);
    // orthonormality and handedness
    const x: Vec3 = [rot[0], rot[3], rot[6]];
    const y: Vec3 = [rot[1], rot[4], rot[7]];
    const dotXY = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    expect(dotXY).toBeCloseTo(0, 12);
    const cross: Vec3 = [
      x[1] * y[2] - x[2] * y[1],
      x[2] * y[0] - x[0] * y[2],
      x[0] * y[1] - x[1] * y[0],
    ];
    expect(cross[0]).toBeCloseTo(z[0], 12);
    expect(cross[1]).toBeCloseTo(z[1], 12);
    expect(cross[2]).toBeCloseTo(z[2], 12);
  });
});
