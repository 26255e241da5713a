/** Neighbor selection and the blending formula.
 *
 * The GPU path renders each selected MPI into a premultiplied framebuffer
 * (ONE, ONE_MINUS_SRC_ALPHA both channels, far-to-near draw order) and a
 * fragment pass computes sum(w*rgb) / max(sum(w*alpha), EPS).  Because the
 * framebuffer color is premultiplied, w*rgb is already the alpha-modulated
 * color term, so this is the normalized alpha-weighted blend.  The CPU
 * reference here implements the identical arithmetic for tests.
 */

import type { CameraPose, Vec3 } from "./math.js";
import { norm, sub } from "./math.js";

export const COVERAGE_EPS = 1e-6;

export interface NeighborWeight {
  index: number;
  weight: number;
}

/** K nearest poses by translation distance with weights exp(-gamma * l);
 * ties broken by lowest index.  Weights are unnormalized (the blend's
 * denominator normalizes). */
export function selectNeighbors(
  target: Vec3,
  poses: CameraPose[],
  gamma: number,
  neighbors: number,
): NeighborWeight[] {
  if (poses.length === 0) throw new Error("no MPI poses to select from");
  const order = poses
    .map((p, index) => ({ index, dist: norm(sub(p.center, target)) }))
    .sort((a, b) => a.dist - b.dist || a.index - b.index);
  const k = Math.min(neighbors, poses.length);
  return order.slice(0, k).map(({ index, dist }) => ({
    index,
    weight: Math.exp(-gamma * dist),
  }));
}

/** Pixel disparity of the nearest scene point between target and pose. */
export function maxDisparityPx(target: Vec3, pose: CameraPose, zMin: number): number {
  return (norm(sub(pose.center, target)) * pose.focalPx) / zMin;
}

export type Rgba = [number, number, number, number];

/** Porter-Duff over on premultiplied colors (front over back). */
export function overPremultiplied(front: Rgba, back: Rgba): Rgba {
  const keep = 1 - front[3];
  return [
    front[0] + back[0] * keep,
    front[1] + back[1] * keep,
    front[2] + back[2] * keep,
    front[3] + back[3] * keep,
  ];
}

/** Composite straight-alpha plane samples given back (far) to front (near);
 * returns the premultiplied result, exactly what the plane pass leaves in
 * its framebuffer at one pixel. */
export function compositePlanes(planesBackToFront: Rgba[]): Rgba {
  let out: Rgba = [0, 0, 0, 0];
  for (const plane of planesBackToFront) {
    const a = plane[3];
    const premultiplied: Rgba = [plane[0] * a, plane[1] * a, plane[2] * a, a];
    out = overPremultiplied(premultiplied, out);
  }
  return out;
}

/** The blend pass at one pixel: premultiplied per-MPI colors in, final
 * color out; epsilon fallback averages the raw colors when nothing has
 * opacity. */
export function blendPixel(renders: Rgba[], weights: number[]): {
  rgb: [number, number, number];
  coverage: number;
  fallback: boolean;
} {
  if (renders.length !== weights.length || renders.length === 0) {
    throw new Error("renders and weights must align and be non-empty");
  }
  let r = 0;
  let g = 0;
  let b = 0;
  let denom = 0;
  let wSum = 0;
  for (let i = 0; i < renders.length; i++) {
    const w = weights[i];
    r += w * renders[i][0];
    g += w * renders[i][1];
    b += w * renders[i][2];
    denom += w * renders[i][3];
    wSum += w;
  }
  const fallback = denom < COVERAGE_EPS;
  const d = fallback ? wSum : denom;
  return {
    rgb: [r / d, g / d, b / d],
    coverage: fallback ? 0 : denom,
    fallback,
  };
}
