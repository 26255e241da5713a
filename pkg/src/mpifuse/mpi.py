"""Multiplane-image scene representation and its novel-view renderer.

An :class:`Mpi` holds D fronto-parallel RGBA planes sampled linearly in
disparity inside a reference camera frustum.  Novel views within a local
neighborhood are rendered by homography-warping each plane into the target
raster and over-compositing back to front.

Planes store straight (non-premultiplied) alpha; premultiplication happens
inside compositing.  Render output keeps the premultiplied convention:
``RenderOutput.rgb`` is the energy-conserving composite (rgb <= alpha per
channel) and ``RenderOutput.alpha`` the accumulated opacity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Camera, cameras_equal, homography_determinant, plane_homography

logger = logging.getLogger(__name__)

DEGENERATE_DET_TOL = 1e-10


@dataclass(frozen=True)
class Mpi:
    """Reference camera plus D RGBA planes at ascending disparities (far first)."""

    camera: Camera
    depth_planes: np.ndarray  # (D,) disparities in 1/meters, strictly increasing
    planes: np.ndarray        # (D, H, W, 4) RGBA in [0, 1], straight alpha

    def __post_init__(self):
        d = np.asarray(self.depth_planes, dtype=np.float64)
        p = np.asarray(self.planes)
        object.__setattr__(self, "depth_planes", d)
        object.__setattr__(self, "planes", p)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("depth_planes must be a non-empty 1-D array")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("disparities must be finite and non-negative")
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ValueError("disparities must be strictly increasing (far to near)")
        k = self.camera.intrinsics
        if p.shape != (d.size, k.height_px, k.width_px, 4):
            raise ValueError(f"planes shape {p.shape} does not match "
                             f"D={d.size}, H={k.height_px}, W={k.width_px}, RGBA")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("plane values must lie in [0, 1]")
        d.flags.writeable = False
        p.flags.writeable = False

    @property
    def num_planes(self) -> int:
        return int(self.depth_planes.size)

    @property
    def z_min(self) -> float:
        return float(1.0 / self.depth_planes[-1])

    @property
    def z_max(self) -> float:
        d0 = self.depth_planes[0]
        return float("inf") if d0 == 0 else float(1.0 / d0)


@dataclass(frozen=True)
class RenderOutput:
    """Premultiplied RGB composite and accumulated alpha in the target raster."""

    rgb: np.ndarray    # (H, W, 3) in [0, 1]
    alpha: np.ndarray  # (H, W) in [0, 1]

    def __post_init__(self):
        if self.rgb.shape[:2] != self.alpha.shape or self.rgb.shape[2:] != (3,):
            raise ValueError(f"inconsistent shapes {self.rgb.shape}, {self.alpha.shape}")


@dataclass
class RenderCounter:
    """Counts plane pixels touched by the renderer (for complexity accounting)."""

    plane_pixels: int = 0


def plane_disparities(z_min: float, z_max: float, count: int) -> np.ndarray:
    """Disparities sampled linearly from 1/z_max (far) to 1/z_min (near), inclusive.

    A single plane sits at 1/z_min.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not (0 < z_min <= z_max):
        raise ValueError(f"need 0 < z_min <= z_max, got {z_min}, {z_max}")
    near = 1.0 / z_min
    far = 0.0 if np.isinf(z_max) else 1.0 / z_max
    if count == 1:
        return np.array([near])
    return np.linspace(far, near, count)


def premultiply(plane: np.ndarray) -> np.ndarray:
    """Straight-alpha RGBA -> premultiplied RGBA."""
    out = np.array(plane, dtype=np.float64)
    out[..., :3] *= out[..., 3:4]
    return out


def over(front: np.ndarray, back: np.ndarray) -> np.ndarray:
    """Porter-Duff over on premultiplied RGBA images.  Associative."""
    return front + back * (1.0 - front[..., 3:4])


def composite_over(planes_back_to_front: Sequence[np.ndarray] | np.ndarray) -> RenderOutput:
    """Over-composite straight-alpha RGBA planes, given back (far) to front (near).

    rgb_out = sum_i premult(plane_i) * prod_{j nearer} (1 - alpha_j);
    alpha_out = 1 - prod_i (1 - alpha_i).
    """
    planes = list(planes_back_to_front)
    if not planes:
        raise ValueError("no planes to composite")
    shape = planes[0].shape
    for p in planes:
        if p.shape != shape or p.shape[-1] != 4:
            raise ValueError(f"plane shapes inconsistent: {p.shape} vs {shape}")
    rgb = np.zeros(shape[:-1] + (3,), dtype=np.float64)
    alpha = np.zeros(shape[:-1], dtype=np.float64)
    for p in planes:
        a = np.asarray(p[..., 3], dtype=np.float64)
        keep = 1.0 - a
        rgb = np.asarray(p[..., :3], dtype=np.float64) * a[..., None] + rgb * keep[..., None]
        alpha = a + alpha * keep
    return RenderOutput(np.clip(rgb, 0.0, 1.0), np.clip(alpha, 0.0, 1.0))


def sample_bilinear(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear sample at (x, y) pixel coordinates with zero padding outside.

    Integer coordinates address pixel centers; samples beyond the image
    border fade to zero over one pixel, so a warped alpha channel reports
    field-of-view falloff honestly.
    """
    h, w = image.shape[:2]
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    out = np.zeros(x.shape + (image.shape[2],), dtype=np.float64)
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi = x0 + dx
        yi = y0 + dy
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xi_c = np.clip(xi, 0, w - 1)
        yi_c = np.clip(yi, 0, h - 1)
        out += (wgt * inside)[..., None] * image[yi_c, xi_c]
    return out


def _target_grid(cam: Camera) -> np.ndarray:
    """Homogeneous pixel coordinates of the camera raster, shape (3, H*W)."""
    k = cam.intrinsics
    u, v = np.meshgrid(np.arange(k.width_px, dtype=np.float64),
                       np.arange(k.height_px, dtype=np.float64))
    return np.stack([u.ravel(), v.ravel(), np.ones(u.size)])


def render_mpi(mpi: Mpi, target: Camera, counter: RenderCounter | None = None) -> RenderOutput:
    """Render an MPI into the target camera raster.

    Each plane is resampled through its induced homography with bilinear
    interpolation (out-of-bounds samples are transparent), then planes are
    over-composited far to near.  Equivalent to per-ray compositing: the
    inverse homography is exactly the target-ray / plane intersection.

    Planes whose warp is degenerate (plane through the target center) are
    skipped with a diagnostic.
    """
    k = target.intrinsics
    h_px, w_px = k.height_px, k.width_px
    if cameras_equal(target, mpi.camera):
        # Identity warp: composite stored planes directly (exact).
        if counter is not None:
            counter.plane_pixels += mpi.num_planes * h_px * w_px
        return composite_over(mpi.planes)

    grid = _target_grid(target)
    rgb = np.zeros((h_px, w_px, 3), dtype=np.float64)
    alpha = np.zeros((h_px, w_px), dtype=np.float64)
    for i in range(mpi.num_planes):
        disp = float(mpi.depth_planes[i])
        det = homography_determinant(mpi.camera, target, disp)
        if abs(det) < DEGENERATE_DET_TOL:
            logger.warning("skipping plane %d (disparity %g): degenerate warp "
                           "(plane passes through target camera center)", i, disp)
            continue
        hom = plane_homography(mpi.camera, target, disp)
        src = np.linalg.inv(hom) @ grid
        sx = (src[0] / src[2]).reshape(h_px, w_px)
        sy = (src[1] / src[2]).reshape(h_px, w_px)
        warped = sample_bilinear(mpi.planes[i], sx, sy)
        a = warped[..., 3]
        keep = 1.0 - a
        rgb = warped[..., :3] * a[..., None] + rgb * keep[..., None]
        alpha = a + alpha * keep
        if counter is not None:
            counter.plane_pixels += h_px * w_px
    return RenderOutput(np.clip(rgb, 0.0, 1.0), np.clip(alpha, 0.0, 1.0))
