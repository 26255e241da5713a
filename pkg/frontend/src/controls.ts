/** Orbit / pan / dolly camera driven by pointer and wheel events, with the
 * eye clamped to a box around the capture plane. */

import {
  add,
  cameraAxis,
  CameraPose,
  cross,
  lookAtRotation,
  norm,
  normalize,
  scale,
  sub,
  Vec3,
} from "./math.js";

export interface ControlBounds {
  min: Vec3;
  max: Vec3;
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export function boundsAroundPoses(poses: CameraPose[], margin: number): ControlBounds {
  const min: Vec3 = [Infinity, Infinity, Infinity];
  const max: Vec3 = [-Infinity, -Infinity, -Infinity];
  for (const pose of poses) {
    for (let i = 0; i < 3; i++) {
      min[i] = Math.min(min[i], pose.center[i]);
      max[i] = Math.max(max[i], pose.center[i]);
    }
  }
  return {
    min: [min[0] - margin, min[1] - margin, min[2] - margin],
    max: [max[0] + margin, max[1] + margin, max[2] + margin],
  };
}

export class OrbitControls {
  /** world point the camera looks at */
  focus: Vec3;
  /** spherical offsets around the home orientation */
  private yaw = 0;
  private pitch = 0;
  private distance: number;
  private readonly forward: Vec3;
  private readonly downAxis: Vec3;
  private readonly rightAxis: Vec3;
  onChange: () => void = () => {};

  constructor(private readonly template: CameraPose,
              poses: CameraPose[],
              zMin: number,
              private readonly bounds: ControlBounds) {
    const centroid: Vec3 = [0, 0, 0];
    for (const p of poses) {
      centroid[0] += p.center[0] / poses.length;
      centroid[1] += p.center[1] / poses.length;
      centroid[2] += p.center[2] / poses.length;
    }
    this.forward = cameraAxis(poses[0], 2);
    this.downAxis = cameraAxis(poses[0], 1);
    this.rightAxis = normalize(cross(this.downAxis, this.forward));
    this.distance = zMin;
    this.focus = add(centroid, scale(this.forward, zMin));
  }

  attach(element: HTMLElement): void {
    let dragging: "orbit" | "pan" | null = null;
    let lastX = 0;
    let lastY = 0;
    element.addEventListener("pointerdown", (e) => {
      dragging = e.button === 2 || e.shiftKey ? "pan" : "orbit";
      lastX = e.clientX;
      lastY = e.clientY;
      element.setPointerCapture(e.pointerId);
    });
    element.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      const dx = e.clientX - lastX;
      const dy = e.clientY - lastY;
      lastX = e.clientX;
      lastY = e.clientY;
      if (dragging === "orbit") {
        this.orbit(dx * 0.004, dy * 0.004);
      } else {
        this.pan(-dx * 0.001 * this.distance, -dy * 0.001 * this.distance);
      }
    });
    const stop = () => { dragging = null; };
    element.addEventListener("pointerup", stop);
    element.addEventListener("pointercancel", stop);
    element.addEventListener("contextmenu", (e) => e.preventDefault());
    element.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.dolly(Math.exp(e.deltaY * 0.001));
    }, { passive: false });
  }

  orbit(dYaw: number, dPitch: number): void {
    this.yaw = clamp(this.yaw + dYaw, -1.2, 1.2);
    this.pitch = clamp(this.pitch + dPitch, -1.2, 1.2);
    this.onChange();
  }

  pan(dRight: number, dDown: number): void {
    this.focus = add(this.focus,
                     add(scale(this.rightAxis, dRight), scale(this.downAxis, dDown)));
    this.onChange();
  }

  dolly(factor: number): void {
    this.distance = clamp(this.distance * factor, 0.05, 100.0);
    this.onChange();
  }

  /** Camera pose for the current orbit state, eye clamped to the bounds box. */
  pose(): CameraPose {
    const dir = normalize(add(
      scale(this.forward, Math.cos(this.yaw) * Math.cos(this.pitch)),
      add(scale(this.rightAxis, Math.sin(this.yaw) * Math.cos(this.pitch)),
          scale(this.downAxis, Math.sin(this.pitch)))));
    let eye = sub(this.focus, scale(dir, this.distance));
    eye = [
      clamp(eye[0], this.bounds.min[0], this.bounds.max[0]),
      clamp(eye[1], this.bounds.min[1], this.bounds.max[1]),
      clamp(eye[2], this.bounds.min[2], this.bounds.max[2]),
    ];
    if (norm(sub(this.focus, eye)) < 1e-6) {
      eye = sub(this.focus, scale(dir, 0.05));
    }
    return {
      ...this.template,
      rotation: lookAtRotation(eye, this.focus, this.downAxis),
      center: eye,
    };
  }
}
