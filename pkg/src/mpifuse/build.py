"""MPI construction: plane sweep volumes, a photoconsistency builder, and
ground-truth MPIs for synthetic layered scenes.

The photoconsistency builder stands in for a learned predictor while
honoring the same output contract: per-voxel opacity plus color chosen as
a convex combination of the source-volume colors, so an externally
produced MPI can be dropped in through the bundle importer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .geometry import Camera, cameras_equal, plane_homography
from .mpi import Mpi, RenderOutput, composite_over, plane_disparities, sample_bilinear

DEFAULT_TEMPERATURE = 1e-3  # squared-color units; concentrates the depth softmax
_TIE_EPS = 1e-12
NUM_PSV_SOURCES = 5


@dataclass(frozen=True)
class Psv:
    """Plane sweep volumes: each source resampled onto the reference frustum planes."""

    ref_camera: Camera
    depth_planes: np.ndarray      # (D,) disparities ascending (far to near)
    volumes: np.ndarray           # (V, H, W, D, 3) RGB
    valid: np.ndarray             # (V, H, W, D) True where the source sample was in bounds
    source_cameras: tuple[Camera, ...]

    def __post_init__(self):
        v = self.volumes
        k = self.ref_camera.intrinsics
        n_src = len(self.source_cameras)
        if not 2 <= n_src <= NUM_PSV_SOURCES:
            raise ValueError(f"need 2..{NUM_PSV_SOURCES} source views, got {n_src}")
        expected = (n_src, k.height_px, k.width_px, self.depth_planes.size, 3)
        if v.shape != expected:
            raise ValueError(f"volume shape {v.shape} != {expected}")
        if self.valid.shape != expected[:4]:
            raise ValueError(f"valid mask shape {self.valid.shape} != {expected[:4]}")

    @property
    def num_planes(self) -> int:
        return int(self.depth_planes.size)


def build_psv(ref: Camera, sources: Sequence[tuple[Camera, np.ndarray]], num_planes: int,
              z_min: float, z_max: float, *, allow_fewer: bool = False) -> Psv:
    """Resample each source image onto the reference frustum's disparity planes.

    ``sources`` are (camera, HxWx3 image) pairs and must include the
    reference view itself.  Exactly five views are expected (the reference
    plus its four nearest neighbors); pass ``allow_fewer`` to accept a
    degraded 2-4 view sweep.
    """
    sources = list(sources)
    if len(sources) != NUM_PSV_SOURCES and not (allow_fewer and 2 <= len(sources) <= NUM_PSV_SOURCES):
        raise ValueError(f"expected {NUM_PSV_SOURCES} source views, got {len(sources)} "
                         "(set allow_fewer for a degraded 2-4 view sweep)")
    if not any(cameras_equal(cam, ref) for cam, _ in sources):
        raise ValueError("sources must include the reference view itself")
    disparities = plane_disparities(z_min, z_max, num_planes)
    k = ref.intrinsics
    h_px, w_px = k.height_px, k.width_px
    u, v = np.meshgrid(np.arange(w_px, dtype=np.float64), np.arange(h_px, dtype=np.float64))
    grid = np.stack([u.ravel(), v.ravel(), np.ones(u.size)])

    volumes = np.zeros((len(sources), h_px, w_px, num_planes, 3), dtype=np.float32)
    valid = np.zeros((len(sources), h_px, w_px, num_planes), dtype=bool)
    for vi, (cam, image) in enumerate(sources):
        if image.shape != (cam.intrinsics.height_px, cam.intrinsics.width_px, 3):
            raise ValueError(f"source {vi} image shape {image.shape} does not match its camera")
        sw, sh = cam.intrinsics.width_px, cam.intrinsics.height_px
        identity = cameras_equal(cam, ref)
        for di, disp in enumerate(disparities):
            if identity:
                volumes[vi, :, :, di] = image
                valid[vi, :, :, di] = True
                continue
            hom = plane_homography(ref, cam, float(disp))
            src = hom @ grid
            sx = (src[0] / src[2]).reshape(h_px, w_px)
            sy = (src[1] / src[2]).reshape(h_px, w_px)
            volumes[vi, :, :, di] = sample_bilinear(image, sx, sy)
            valid[vi, :, :, di] = (sx >= 0) & (sx <= sw - 1) & (sy >= 0) & (sy <= sh - 1)
    return Psv(ref, disparities, volumes, valid, tuple(cam for cam, _ in sources))


def build_mpi_photoconsistency(psv: Psv, temperature: float = DEFAULT_TEMPERATURE) -> Mpi:
    """Estimate an MPI from a plane sweep volume by multi-view color agreement.

    Per pixel, each depth is scored by the negative mean per-channel color
    variance across the valid volumes; a depth-wise softmax (sharpened by
    ``temperature``) gives the fraction of the pixel's opacity each slice
    should receive, realized as alphas whose transmittance-weighted sum is
    that softmax.  Exact score ties put all mass on the farthest slice.
    Voxel colors are the validity-masked mean of the source volumes; pixels
    where fewer than two volumes agree at every depth stay transparent.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    vols = np.asarray(psv.volumes, dtype=np.float64)
    valid = psv.valid
    n = valid.sum(axis=0)                               # (H, W, D)
    n_safe = np.maximum(n, 1)
    mean = (vols * valid[..., None]).sum(axis=0) / n_safe[..., None]
    sq_dev = ((vols - mean[None]) ** 2) * valid[..., None]
    variance = sq_dev.sum(axis=0) / n_safe[..., None]
    score = -variance.mean(axis=-1)                     # (H, W, D)

    usable = n >= 2
    any_usable = usable.any(axis=-1)                    # (H, W)
    neg_inf = np.float64(-np.inf)
    masked = np.where(usable, score, neg_inf)
    s_max = masked.max(axis=-1, where=usable, initial=neg_inf)
    s_min = masked.min(axis=-1, where=usable, initial=np.inf)
    tied = any_usable & ((s_max - s_min) <= _TIE_EPS)

    with np.errstate(invalid="ignore"):
        logits = np.where(usable, (masked - s_max[..., None]) / temperature, neg_inf)
    weights = np.where(usable, np.exp(logits), 0.0)
    total = weights.sum(axis=-1, keepdims=True)
    profile = np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)

    # Tie rule: farthest usable slice (index 0 is farthest) takes everything.
    first_usable = usable.argmax(axis=-1)
    onehot = np.zeros_like(profile)
    hh, ww = np.nonzero(tied)
    onehot[hh, ww, first_usable[hh, ww]] = 1.0
    profile = np.where(tied[..., None], onehot, profile)
    profile[~any_usable] = 0.0

    # Realize the profile as alphas: alpha_d = p_d / (1 - sum of nearer p).
    tail = np.cumsum(profile[..., ::-1], axis=-1)[..., ::-1]   # p_d + nearer mass
    transmittance = 1.0 - (tail - profile)
    alpha = np.divide(profile, transmittance,
                      out=(profile > _TIE_EPS).astype(np.float64),
                      where=transmittance > _TIE_EPS)
    alpha = np.clip(alpha, 0.0, 1.0)

    color = np.where((n > 0)[..., None], mean, 0.0)
    planes = np.concatenate([color, alpha[..., None]], axis=-1)     # (H, W, D, 4)
    planes = np.clip(np.moveaxis(planes, 2, 0), 0.0, 1.0)           # (D, H, W, 4)
    return Mpi(psv.ref_camera, psv.depth_planes, planes)


# --- synthetic layered scenes -------------------------------------------------


@dataclass(frozen=True)
class Layer:
    """Fronto-parallel textured rectangle at a fixed world depth.

    ``extent`` is (center_x, center_y, width, height) in meters on the
    plane z = depth; the RGBA texture maps onto it, transparent outside.
    """

    depth: float
    texture: np.ndarray  # (th, tw, 4) RGBA in [0, 1]
    extent: tuple[float, float, float, float]

    def __post_init__(self):
        if self.depth <= 0:
            raise ValueError("layer depth must be positive")
        if self.texture.ndim != 3 or self.texture.shape[2] != 4:
            raise ValueError(f"texture must be RGBA, got shape {self.texture.shape}")
        if self.extent[2] <= 0 or self.extent[3] <= 0:
            raise ValueError("layer extent must have positive size")


@dataclass(frozen=True)
class LayeredScene:
    layers: tuple[Layer, ...]   # strictly increasing depth (nearest first)
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        depths = [layer.depth for layer in self.layers]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise ValueError(f"layer depths must be strictly increasing, got {depths}")


def _layer_axis_depth(layer: Layer, cam: Camera) -> float:
    """Distance along the camera optical axis to the layer plane."""
    r_zz = cam.pose.rotation[2, 2]
    if abs(r_zz) < 1e-9:
        raise ValueError("camera optical axis is parallel to the layer planes")
    return (layer.depth - cam.pose.translation[2]) / r_zz


def rasterize_layer(layer: Layer, cam: Camera) -> np.ndarray:
    """Exact projection of a layer into a camera raster as straight-alpha RGBA."""
    k = cam.intrinsics
    u, v = np.meshgrid(np.arange(k.width_px, dtype=np.float64),
                       np.arange(k.height_px, dtype=np.float64))
    ray = np.stack([(u - k.principal_x) / k.focal_px,
                    (v - k.principal_y) / k.focal_px,
                    np.ones_like(u)], axis=-1)
    dir_world = ray @ cam.pose.rotation.T
    dz = dir_world[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (layer.depth - cam.pose.translation[2]) / dz
    hit = np.isfinite(t) & (t > 0)
    t = np.where(hit, t, 1.0)
    px = cam.pose.translation[0] + t * dir_world[..., 0]
    py = cam.pose.translation[1] + t * dir_world[..., 1]

    cx, cy, ww, hh = layer.extent
    th, tw = layer.texture.shape[:2]
    tx = (px - (cx - ww / 2.0)) / ww * tw - 0.5
    ty = (py - (cy - hh / 2.0)) / hh * th - 0.5
    rgba = sample_bilinear(layer.texture, tx, ty)
    rgba[~hit] = 0.0
    return rgba


def flatten_on_background(render: RenderOutput,
                          background: tuple[float, float, float]) -> np.ndarray:
    """Composite a premultiplied render over a constant background color."""
    bg = np.asarray(background, dtype=np.float64)
    return np.clip(render.rgb + (1.0 - render.alpha)[..., None] * bg, 0.0, 1.0)


def render_layered_scene(scene: LayeredScene, cam: Camera) -> np.ndarray:
    """Analytic scene render: project every layer, over-composite, add background."""
    k = cam.intrinsics
    if not scene.layers:
        return np.tile(np.asarray(scene.background, dtype=np.float64),
                       (k.height_px, k.width_px, 1))
    rasters = [rasterize_layer(layer, cam) for layer in reversed(scene.layers)]
    return flatten_on_background(composite_over(rasters), scene.background)


def build_mpi_groundtruth(scene: LayeredScene, ref: Camera, num_planes: int,
                          z_min: float, z_max: float) -> Mpi:
    """Write each layer's reference-view projection onto its nearest disparity slice.

    Slices holding no layer stay fully transparent; layers that collapse
    onto one slice merge near-over-far.  Layers outside [z_min, z_max]
    raise with the offending depth.
    """
    disparities = plane_disparities(z_min, z_max, num_planes)
    slices = np.zeros((num_planes, ref.intrinsics.height_px, ref.intrinsics.width_px, 4))
    occupied = np.zeros(num_planes, dtype=bool)
    for layer in reversed(scene.layers):     # far to near: later layers land on top
        axis_depth = _layer_axis_depth(layer, ref)
        if not (z_min - 1e-12 <= axis_depth <= z_max + 1e-12):
            raise ValueError(f"layer at depth {layer.depth} m sits {axis_depth:.6g} m from "
                             f"the reference camera, outside [{z_min}, {z_max}]")
        idx = int(np.argmin(np.abs(disparities - 1.0 / axis_depth)))
        raster = rasterize_layer(layer, ref)
        if not occupied[idx]:
            slices[idx] = raster
            occupied[idx] = True
        else:
            base = slices[idx]
            a_new = raster[..., 3:4]
            a_out = a_new + base[..., 3:4] * (1.0 - a_new)
            premult = raster[..., :3] * a_new + base[..., :3] * base[..., 3:4] * (1.0 - a_new)
            rgb = np.divide(premult, a_out, out=np.zeros_like(premult), where=a_out > 0)
            slices[idx] = np.concatenate([rgb, a_out], axis=-1)
    return Mpi(ref, disparities, np.clip(slices, 0.0, 1.0))


# --- scene fixtures and their file format -------------------------------------


def smooth_noise(rng: np.random.Generator, height: int, width: int,
                 cells: int = 6) -> np.ndarray:
    """Band-limited noise in [0, 1]: low-res uniform grid upsampled smoothly."""
    coarse = rng.uniform(0.0, 1.0, size=(max(cells, 2), max(cells, 2)))
    zoomed = ndimage.zoom(coarse, (height / coarse.shape[0], width / coarse.shape[1]), order=3)
    zoomed = zoomed[:height, :width]
    lo, hi = zoomed.min(), zoomed.max()
    return (zoomed - lo) / (hi - lo) if hi > lo else np.full((height, width), 0.5)


def frustum_extent(depth: float, cam_fov_x: float, aspect: float,
                   camera_span: float, margin: float = 1.2) -> tuple[float, float, float, float]:
    """Layer extent covering every frustum of cameras within ``camera_span`` of origin."""
    half_w = depth * math.tan(cam_fov_x / 2.0) * margin + camera_span
    half_h = half_w * aspect
    return (0.0, 0.0, 2.0 * half_w, 2.0 * half_h)


def make_random_scene(rng: np.random.Generator, num_layers: int, depths: Sequence[float],
                      cam_fov_x: float, width_px: int, height_px: int,
                      camera_span: float, texture_scale: int = 2,
                      texture_cells: int = 5) -> LayeredScene:
    """Random smooth-textured layered scene: opaque backdrop plus blob layers.

    ``texture_cells`` sets the color detail level; raising it toward the
    raster resolution pushes texture content up to the image Nyquist rate.
    """
    if num_layers < 1:
        raise ValueError("need at least one layer")
    if len(depths) != num_layers:
        raise ValueError(f"need {num_layers} depths, got {len(depths)}")
    th, tw = height_px * texture_scale, width_px * texture_scale
    aspect = height_px / width_px
    layers = []
    for i, depth in enumerate(sorted(depths)):
        rgb = np.stack([smooth_noise(rng, th, tw, cells=texture_cells + 2 * c)
                        for c in range(3)], axis=-1)
        if i == num_layers - 1:
            alpha = np.ones((th, tw))
        else:
            blob = smooth_noise(rng, th, tw, cells=4 + i)
            alpha = np.clip((blob - 0.55) * 8.0, 0.0, 1.0)
        texture = np.concatenate([rgb, alpha[..., None]], axis=-1)
        layers.append(Layer(depth, texture, frustum_extent(depth, cam_fov_x, aspect, camera_span)))
    return LayeredScene(tuple(layers), background=(0.0, 0.0, 0.0))


def save_scene(scene: LayeredScene, out_dir: str | Path) -> None:
    from .images import save_png

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"background": list(scene.background), "layers": []}
    for i, layer in enumerate(scene.layers):
        name = f"layer_{i:02d}.png"
        save_png(out_dir / name, layer.texture, bit_depth=16)
        manifest["layers"].append({
            "depth": layer.depth,
            "extent": list(layer.extent),
            "texture": name,
        })
    (out_dir / "scene.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_scene(path: str | Path) -> LayeredScene:
    from .images import load_png

    path = Path(path)
    scene_dir = path if path.is_dir() else path.parent
    manifest = json.loads((scene_dir / "scene.json").read_text())
    layers = []
    for entry in manifest["layers"]:
        texture = load_png(scene_dir / entry["texture"])
        if texture.shape[2] == 3:
            texture = np.concatenate([texture, np.ones(texture.shape[:2] + (1,))], axis=-1)
        layers.append(Layer(float(entry["depth"]), texture, tuple(entry["extent"])))
    return LayeredScene(tuple(layers), background=tuple(manifest["background"]))
