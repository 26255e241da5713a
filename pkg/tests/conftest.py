"""Shared fixtures and independent oracle helpers.

The oracles here deliberately avoid the library's warp/composite code
paths: bilinear sampling is re-implemented scalar-style, and novel views
are reproduced by intersecting per-pixel rays with each plane.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from mpifuse.geometry import Camera, Intrinsics, Pose


def random_rotation(rng: np.random.Generator, max_angle_rad: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle_rad, max_angle_rad)
    return Rotation.from_rotvec(angle * axis).as_matrix()


def random_camera(rng: np.random.Generator, width=64, height=48,
                  max_angle_rad=0.2, span=0.5) -> Camera:
    focal = rng.uniform(0.8, 1.5) * width
    intr = Intrinsics(focal, width, height,
                      width / 2.0 + rng.uniform(-2, 2),
                      height / 2.0 + rng.uniform(-2, 2))
    pose = Pose(random_rotation(rng, max_angle_rad), rng.uniform(-span, span, size=3))
    return Camera(intr, pose)


def oracle_bilinear(image: np.ndarray, x: float, y: float) -> np.ndarray:
    """Scalar zero-padded bilinear sample; independent of the library version."""
    h, w = image.shape[:2]
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    fx, fy = x - x0, y - y0
    acc = np.zeros(image.shape[2], dtype=np.float64)
    for dx, dy, weight in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                           (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi, yi = x0 + dx, y0 + dy
        if 0 <= xi < w and 0 <= yi < h:
            acc += weight * image[yi, xi]
    return acc


def _oracle_bilinear_grid(image: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Vectorized zero-padded bilinear gather via flat indexing (oracle-local)."""
    h, w = image.shape[:2]
    flat = image.reshape(-1, image.shape[2])
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0
    acc = np.zeros(sx.shape + (image.shape[2],))
    for dx, dy, weight in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                           (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi, yi = x0 + dx, y0 + dy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        idx = np.where(ok, yi * w + xi, 0)
        acc += np.where(ok, weight, 0.0)[..., None] * flat[idx]
    return acc


def oracle_render_rays(mpi, target: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray MPI render: intersect target pixel rays with each plane, sample,
    and apply the over recurrence far to near.  Vectorized over pixels but
    formulated without homography matrices."""
    k = target.intrinsics
    u, v = np.meshgrid(np.arange(k.width_px, dtype=np.float64),
                       np.arange(k.height_px, dtype=np.float64))
    ray_cam = np.stack([(u - k.principal_x) / k.focal_px,
                        (v - k.principal_y) / k.focal_px,
                        np.ones_like(u)], axis=-1)
    # Express target rays in the MPI reference camera frame.
    r_ref = mpi.camera.pose.rotation
    origin_ref = r_ref.T @ (target.pose.translation - mpi.camera.pose.translation)
    dir_ref = ray_cam @ (r_ref.T @ target.pose.rotation).T

    rk = mpi.camera.intrinsics
    rgb = np.zeros((k.height_px, k.width_px, 3))
    alpha = np.zeros((k.height_px, k.width_px))
    for i in range(mpi.num_planes):
        depth = 1.0 / mpi.depth_planes[i]
        t = (depth - origin_ref[2]) / dir_ref[..., 2]
        px = origin_ref[0] + t * dir_ref[..., 0]
        py = origin_ref[1] + t * dir_ref[..., 1]
        sx = rk.principal_x + rk.focal_px * px / depth
        sy = rk.principal_y + rk.focal_px * py / depth
        sample = _oracle_bilinear_grid(mpi.planes[i], sx, sy)
        a = sample[..., 3]
        rgb = sample[..., :3] * a[..., None] + rgb * (1.0 - a[..., None])
        alpha = a + alpha * (1.0 - a)
    return rgb, alpha


def full_support_mask(mpi, target: Camera) -> np.ndarray:
    """Target pixels whose sample location is in bounds on EVERY MPI plane.

    Outside this region a lone MPI cannot represent all depth content
    (field-of-view falloff), which is the multi-MPI blend's job to fix.
    """
    from mpifuse.geometry import plane_homography
    from mpifuse.mpi import sample_bilinear

    k = target.intrinsics
    u, v = np.meshgrid(np.arange(k.width_px, dtype=float),
                       np.arange(k.height_px, dtype=float))
    grid = np.stack([u.ravel(), v.ravel(), np.ones(u.size)])
    ones = np.ones((mpi.camera.intrinsics.height_px, mpi.camera.intrinsics.width_px, 1))
    mask = np.ones((k.height_px, k.width_px), dtype=bool)
    for d in mpi.depth_planes:
        hom = np.linalg.inv(plane_homography(mpi.camera, target, float(d)))
        src = hom @ grid
        sx = (src[0] / src[2]).reshape(k.height_px, k.width_px)
        sy = (src[1] / src[2]).reshape(k.height_px, k.width_px)
        mask &= sample_bilinear(ones, sx, sy)[..., 0] >= 1 - 1e-9
    return mask


def make_camera(width=64, height=48, focal=None, x=0.0, y=0.0, z=0.0):
    focal = float(width) if focal is None else focal
    intr = Intrinsics(focal, width, height, width / 2.0, height / 2.0)
    return Camera(intr, Pose.at(x, y, z))


def make_two_layer_scene(rng, width=64, height=48, focal=64.0, span=0.8,
                         z_front=1.0, z_back=4.0, cells=14):
    """Opaque textured backdrop plus a blob layer: the classic ghosting scene."""
    import math

    from mpifuse.build import Layer, LayeredScene, frustum_extent, smooth_noise

    fov = 2.0 * math.atan(width / (2.0 * focal))
    aspect = height / width
    th, tw = 192, 256
    layers = []
    for i, depth in enumerate((z_front, z_back)):
        rgb = np.stack([smooth_noise(rng, th, tw, cells=cells + 3 * c)
                        for c in range(3)], axis=-1)
        if i == 0:
            blob = smooth_noise(rng, th, tw, cells=5)
            alpha = np.clip((blob - 0.5) * 10.0, 0.0, 1.0)
        else:
            alpha = np.ones((th, tw))
        tex = np.concatenate([rgb, alpha[..., None]], axis=-1)
        layers.append(Layer(depth, tex, frustum_extent(depth, fov, aspect, span)))
    return LayeredScene(tuple(layers))


def make_disocclusion_pair(rng, baseline=0.25, width=64, height=48, focal=64.0):
    """Two MPIs of a foreground-square-over-backdrop scene, each with the
    backdrop carved out where its own reference view cannot see it.

    Mimics what a per-view depth estimator can know: content occluded from
    the reference view is unknown, so its alpha is zero.  Returns
    (scene, mpi_a, mpi_b, z_min, z_max).
    """
    from mpifuse.build import (Layer, LayeredScene, build_mpi_groundtruth,
                               frustum_extent, smooth_noise)
    from mpifuse.mpi import Mpi

    z_front, z_back = 1.0, 4.0
    fov = 2.0 * np.arctan(width / (2.0 * focal))
    back_rgb = np.stack([smooth_noise(rng, 96, 128, cells=4 + c) for c in range(3)],
                        axis=-1)
    backdrop = Layer(z_back, np.concatenate([back_rgb, np.ones((96, 128, 1))], axis=-1),
                     frustum_extent(z_back, fov, height / width, baseline + 0.2))
    front_tex = np.zeros((16, 16, 4))
    front_tex[..., :3] = rng.uniform(0.2, 1.0, size=3)
    front_tex[..., 3] = 1.0
    front = Layer(z_front, front_tex, (0.0, 0.0, 0.35, 0.35))
    scene = LayeredScene((front, backdrop))

    num_planes = 8
    mpis = []
    for x in (-baseline / 2.0, baseline / 2.0):
        cam = make_camera(width, height, focal, x=x)
        gt = build_mpi_groundtruth(scene, cam, num_planes, z_front, z_back)
        carved = np.array(gt.planes)
        front_idx = int(np.argmin(np.abs(gt.depth_planes - 1.0 / z_front)))
        back_idx = int(np.argmin(np.abs(gt.depth_planes - 1.0 / z_back)))
        occluded = carved[front_idx, ..., 3]
        carved[back_idx, ..., 3] *= 1.0 - occluded
        mpis.append(Mpi(gt.camera, gt.depth_planes, np.clip(carved, 0.0, 1.0)))
    return scene, mpis[0], mpis[1], z_front, z_back


def plane_sweep_rig(rng, width=96, height=72, texture_cells=16):
    """Four-layer scene, 2x2 MPI grid at 32 px adjacent disparity, 16 held-out
    targets: the plane-count sweep construction.

    Layer disparities sit mid-slice for D=8 but on/near slices for D=32 and
    D=64, so the sweep isolates depth quantization.  Blob layers are inset
    so their content stays inside every grid frustum (the field-of-view
    bound's two-view-coverage requirement); targets leave the capture plane
    so grid-bilinear blending cannot cancel first-order ghosts.
    Returns (scene, grid_cameras, target_cameras, z_min, z_max).
    """
    import math

    from mpifuse.build import Layer, LayeredScene, smooth_noise

    focal = width / (2.0 * math.tan(math.radians(32.0)))
    spacing = 32.0 / focal          # 32 px of disparity at z_min = 1
    half = spacing / 2.0
    disparities = [0.2984, 0.5161, 0.7339, 0.9516]
    tan_x, tan_y = (width / 2.0) / focal, (height / 2.0) / focal
    layers = []
    for i, disp in enumerate(sorted(disparities)):
        z = 1.0 / disp
        th, tw = 144, 192
        rgb = np.stack([smooth_noise(rng, th, tw, cells=texture_cells + 3 * c)
                        for c in range(3)], axis=-1)
        if i == 0:  # farthest: opaque backdrop covering every frustum
            alpha = np.ones((th, tw))
            hx = z * tan_x * 1.3 + half + 0.2
            hy = z * tan_y * 1.3 + half + 0.2
        else:
            blob = smooth_noise(rng, th, tw, cells=5 + i)
            alpha = np.clip((blob - 0.5) * 8.0, 0.0, 1.0)
            hx = z * tan_x - half - 0.06
            hy = z * tan_y - half - 0.06
        tex = np.concatenate([rgb, alpha[..., None]], axis=-1)
        layers.append(Layer(z, tex, (0.0, 0.0, 2 * hx, 2 * hy)))
    scene = LayeredScene(tuple(sorted(layers, key=lambda l: l.depth)))

    grid = [make_camera(width, height, focal, x=sx * half, y=sy * half)
            for sy in (-1, 1) for sx in (-1, 1)]
    targets = []
    k = 0
    for j in range(4):
        for i in range(4):
            zoff = (-1) ** k * 0.25 * spacing * ((k % 3) / 2.0)
            targets.append(make_camera(
                width, height, focal,
                x=-half + spacing * (0.2 + 0.6 * i / 3),
                y=-half + spacing * (0.2 + 0.6 * j / 3), z=zoff))
            k += 1
    return scene, grid, targets, 1.0, 4.0


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
