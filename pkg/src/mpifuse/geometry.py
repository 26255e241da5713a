"""Pinhole cameras, rigid poses, and plane-induced homographies.

Conventions used throughout the package:

* The camera frame is right-handed with x right, y down, z forward along
  the optical axis.  Pixel (0, 0) is the center of the top-left pixel.
* ``Pose`` stores the camera-to-world transform: the columns of
  ``rotation`` are the camera axes expressed in world coordinates and
  ``translation`` is the camera center in world coordinates.
  World-to-camera quantities are derived on the fly, never stored.
* Depth is z in the camera frame (meters).  Disparity is reciprocal depth,
  so disparity 0 denotes the plane at infinity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ORTHONORMAL_TOL = 1e-9


class BehindCameraError(ValueError):
    """Raised when a projected point lies at or behind the camera plane."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics with a single focal length in pixel units."""

    focal_px: float
    width_px: int
    height_px: int
    principal_x: float
    principal_y: float

    def __post_init__(self):
        if not (np.isfinite(self.focal_px) and self.focal_px > 0):
            raise ValueError(f"focal_px must be positive and finite, got {self.focal_px}")
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError(f"image size must be >= 1 px, got {self.width_px}x{self.height_px}")
        if not (np.isfinite(self.principal_x) and np.isfinite(self.principal_y)):
            raise ValueError("principal point must be finite")

    @classmethod
    def from_fov(cls, fov_x_rad: float, width_px: int, height_px: int) -> "Intrinsics":
        """Intrinsics with the given horizontal field of view and a centered principal point."""
        focal = width_px / (2.0 * np.tan(fov_x_rad / 2.0))
        return cls(focal, width_px, height_px, width_px / 2.0, height_px / 2.0)

    def matrix(self) -> np.ndarray:
        f, cx, cy = self.focal_px, self.principal_x, self.principal_y
        return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])

    def inverse_matrix(self) -> np.ndarray:
        # Closed form; avoids generic inversion noise on this triangular matrix.
        f, cx, cy = self.focal_px, self.principal_x, self.principal_y
        return np.array([[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid camera-to-world transform (rotation columns = camera axes in world)."""

    rotation: np.ndarray    # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,) camera center in world coordinates (meters)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(self.rotation))
        object.__setattr__(self, "translation", _freeze(self.translation))
        r, t = self.rotation, self.translation
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"bad pose shapes {r.shape}, {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def at(cls, x: float, y: float, z: float = 0.0, rotation: np.ndarray | None = None) -> "Pose":
        return cls(np.eye(3) if rotation is None else rotation, np.array([x, y, z], dtype=np.float64))


@dataclass(frozen=True)
class Camera:
    intrinsics: Intrinsics
    pose: Pose

    def same_raster(self, other: "Camera") -> bool:
        return (self.intrinsics.width_px == other.intrinsics.width_px
                and self.intrinsics.height_px == other.intrinsics.height_px)


def cameras_equal(a: Camera, b: Camera) -> bool:
    return a.intrinsics == b.intrinsics and a.pose == b.pose


def plane_homography(ref: Camera, target: Camera, disparity: float) -> np.ndarray:
    """Homography induced by the fronto-parallel plane at depth 1/disparity in ``ref``.

    The returned 3x3 matrix maps homogeneous reference pixel coordinates to
    target pixel coordinates.  ``disparity`` is in 1/meters; disparity 0 is
    the plane at infinity.  Validated against the unproject/project oracle
    in the test suite: the oracle, not this formula, is the contract.
    """
    if not np.isfinite(disparity) or disparity < 0:
        raise ValueError(f"disparity must be finite and >= 0, got {disparity}")
    r_rel = target.pose.rotation.T @ ref.pose.rotation
    t_rel = target.pose.rotation.T @ (ref.pose.translation - target.pose.translation)
    plane_normal = np.array([0.0, 0.0, 1.0])
    h_metric = r_rel + disparity * np.outer(t_rel, plane_normal)
    h = target.intrinsics.matrix() @ h_metric @ ref.intrinsics.inverse_matrix()
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def homography_determinant(ref: Camera, target: Camera, disparity: float) -> float:
    """det of the metric part of the plane homography.

    Vanishes exactly when the plane passes through the target camera center,
    which is the degenerate warp configuration.
    """
    delta = ref.pose.rotation.T @ (target.pose.translation - ref.pose.translation)
    return 1.0 - disparity * delta[2]


def pixel_disparity(cam_a: Camera, cam_b: Camera, depth: float) -> float:
    """Pixel shift of a fronto-parallel point at ``depth`` between the two cameras.

    Defined for translational baselines; warns when the cameras do not share
    an orientation because the notion of a single scalar disparity breaks
    down there.
    """
    if not np.isfinite(depth) or depth <= 0:
        raise ValueError(f"depth must be positive, got {depth}")
    if not np.allclose(cam_a.pose.rotation, cam_b.pose.rotation, atol=1e-9):
        warnings.warn("pixel_disparity called with differently oriented cameras; "
                      "result assumes a translational baseline", stacklevel=2)
    baseline = float(np.linalg.norm(cam_a.pose.translation - cam_b.pose.translation))
    return baseline * cam_a.intrinsics.focal_px / depth


def project(cam: Camera, world_point: np.ndarray) -> tuple[np.ndarray, float]:
    """Project a world point; returns (pixel, depth).  Raises behind the camera."""
    p = np.asarray(world_point, dtype=np.float64)
    x_cam = cam.pose.rotation.T @ (p - cam.pose.translation)
    z = x_cam[2]
    if z <= 0:
        raise BehindCameraError(f"point has non-positive camera depth {z}")
    k = cam.intrinsics
    pixel = np.array([k.principal_x + k.focal_px * x_cam[0] / z,
                      k.principal_y + k.focal_px * x_cam[1] / z])
    return pixel, float(z)


def unproject(cam: Camera, pixel: np.ndarray, depth: float) -> np.ndarray:
    """World point on the ray through ``pixel`` at camera depth ``depth``."""
    if depth <= 0:
        raise ValueError(f"depth must be positive, got {depth}")
    k = cam.intrinsics
    x_cam = np.array([(pixel[0] - k.principal_x) / k.focal_px * depth,
                      (pixel[1] - k.principal_y) / k.focal_px * depth,
                      depth])
    return cam.pose.rotation @ x_cam + cam.pose.translation


# --- pose file I/O -----------------------------------------------------------
#
# Plain text, one camera per line, 17 whitespace-separated decimal fields:
#   W H focal_px cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
# '#' starts a comment.

CAMERA_RECORD_LEN = 17


def camera_to_record(cam: Camera) -> np.ndarray:
    k, p = cam.intrinsics, cam.pose
    return np.concatenate([
        [float(k.width_px), float(k.height_px), k.focal_px, k.principal_x, k.principal_y],
        p.rotation.reshape(-1),
        p.translation,
    ])


def camera_from_record(rec: Sequence[float]) -> Camera:
    rec = np.asarray(rec, dtype=np.float64)
    if rec.shape != (CAMERA_RECORD_LEN,):
        raise ValueError(f"camera record must have {CAMERA_RECORD_LEN} fields, got {rec.shape}")
    intr = Intrinsics(rec[2], int(round(rec[0])), int(round(rec[1])), rec[3], rec[4])
    pose = Pose(rec[5:14].reshape(3, 3), rec[14:17])
    return Camera(intr, pose)


def load_cameras(path: str | Path) -> list[Camera]:
    cams = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        if len(fields) != CAMERA_RECORD_LEN:
            raise ValueError(f"{path}:{lineno}: expected {CAMERA_RECORD_LEN} fields, got {len(fields)}")
        cams.append(camera_from_record([float(f) for f in fields]))
    return cams


def save_cameras(path: str | Path, cameras: Sequence[Camera]) -> None:
    lines = [" ".join(format(v, ".17g") for v in camera_to_record(c)) for c in cameras]
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)
