"""Continuous view reconstruction by blending renders from neighboring MPIs.

The fused color at a pixel is sum_k w_k a_k C_k / sum_k w_k a_k, where w_k
is a scalar per-MPI blending weight, C_k the rendered color and a_k the
accumulated alpha of render k at that pixel.  Alpha modulation is what
lets one MPI fill in content that is occluded from (or outside the
frustum of) another.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Camera, Pose
from .mpi import Mpi, RenderCounter, RenderOutput, render_mpi

GRID_BILINEAR = "grid-bilinear"
IRREGULAR_EXPONENTIAL = "irregular-exponential"

COVERAGE_EPS = 1e-6
LATTICE_REL_TOL = 1e-6
DEFAULT_IRREGULAR_NEIGHBORS = 5


class LatticeError(ValueError):
    """Grid-bilinear mode requested on poses that do not form a planar lattice."""


@dataclass(frozen=True)
class BlendWeights:
    """Unnormalized per-MPI blending weights; normalization happens in fuse()."""

    entries: tuple[tuple[int, float], ...]  # (mpi index, weight >= 0)
    mode: str
    gamma: float | None = None  # pixels/meter, irregular mode only

    def __post_init__(self):
        if not self.entries:
            raise ValueError("blend weights must have at least one entry")
        ws = np.array([w for _, w in self.entries])
        if np.any(~np.isfinite(ws)) or np.any(ws < 0):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(ws > 0):
            raise ValueError("at least one weight must be positive")
        if self.mode == GRID_BILINEAR and len(self.entries) != 4:
            raise ValueError(f"grid mode needs exactly 4 entries, got {len(self.entries)}")
        if self.mode not in (GRID_BILINEAR, IRREGULAR_EXPONENTIAL):
            raise ValueError(f"unknown blend mode {self.mode!r}")

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries])

    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]


@dataclass(frozen=True)
class FusedView:
    """Fused RGB image plus per-pixel total modulated weight (diagnostic)."""

    rgb: np.ndarray       # (H, W, 3) in [0, 1]
    coverage: np.ndarray  # (H, W); 0 flags pixels that used the unmodulated fallback


def blend_gamma(focal_px: float, num_planes: int, z_min: float) -> float:
    """Exponential falloff constant in pixels/meter: focal_px / (D * z_min)."""
    if focal_px <= 0 or num_planes < 1 or z_min <= 0:
        raise ValueError("gamma needs positive focal_px, num_planes >= 1 and z_min > 0")
    return focal_px / (num_planes * z_min)


def _lattice_axis(values: np.ndarray, tol: float) -> np.ndarray | None:
    """Sorted unique coordinates if evenly spaced within tol, else None."""
    uniq = [values.min()]
    for v in np.sort(values):
        if v - uniq[-1] > tol:
            uniq.append(v)
    uniq = np.asarray(uniq)
    if uniq.size < 2:
        return uniq
    steps = np.diff(uniq)
    if np.max(steps) - np.min(steps) > tol:
        return None
    return uniq


def _grid_bilinear(target: Pose, translations: np.ndarray) -> list[tuple[int, float]]:
    spread = translations.max(axis=0) - translations.min(axis=0)
    scale = max(float(spread.max()), 1e-12)
    tol = LATTICE_REL_TOL * scale
    normal_axis = int(np.argmin(spread))
    if spread[normal_axis] > tol:
        raise LatticeError("poses do not lie on an axis-aligned plane")
    ax_u, ax_v = [a for a in range(3) if a != normal_axis]
    us = _lattice_axis(translations[:, ax_u], tol)
    vs = _lattice_axis(translations[:, ax_v], tol)
    if us is None or vs is None or us.size < 2 or vs.size < 2:
        raise LatticeError("pose coordinates are not evenly spaced on both lattice axes")
    if len(translations) != us.size * vs.size:
        raise LatticeError(f"lattice is incomplete: {len(translations)} poses "
                           f"for a {us.size}x{vs.size} grid")
    cell = {}
    for k, t in enumerate(translations):
        i = int(np.argmin(np.abs(us - t[ax_u])))
        j = int(np.argmin(np.abs(vs - t[ax_v])))
        if abs(us[i] - t[ax_u]) > tol or abs(vs[j] - t[ax_v]) > tol or (i, j) in cell:
            raise LatticeError("poses do not map one-to-one onto lattice sites")
        cell[(i, j)] = k

    tu = float(target.translation[ax_u])
    tv = float(target.translation[ax_v])
    i = int(np.clip(np.searchsorted(us, tu) - 1, 0, us.size - 2))
    j = int(np.clip(np.searchsorted(vs, tv) - 1, 0, vs.size - 2))
    fu = float(np.clip((tu - us[i]) / (us[i + 1] - us[i]), 0.0, 1.0))
    fv = float(np.clip((tv - vs[j]) / (vs[j + 1] - vs[j]), 0.0, 1.0))
    # Residual first coefficient makes the four weights sum to exactly 1.0
    # under the left-to-right summation used by the partition test.
    w_uv = fu * fv
    w_u = fu * (1.0 - fv)
    w_v = (1.0 - fu) * fv
    w_00 = 1.0 - ((w_uv + w_u) + w_v)
    return [(cell[(i, j)], w_00), (cell[(i, j + 1)], w_v),
            (cell[(i + 1, j)], w_u), (cell[(i + 1, j + 1)], w_uv)]


def blend_weights(target: Pose, mpi_poses: Sequence[Pose], mode: str = IRREGULAR_EXPONENTIAL,
                  *, focal_px: float | None = None, num_planes: int | None = None,
                  z_min: float | None = None, neighbors: int | None = None) -> BlendWeights:
    """Select neighboring MPIs and their unnormalized blending weights.

    Irregular mode takes the ``neighbors`` nearest MPIs by translation
    distance (ties broken by lowest index) with weights exp(-gamma * l),
    gamma = focal_px / (num_planes * z_min).  Grid mode requires the poses
    to form an axis-aligned planar lattice and returns the four cell
    corners with bilinear coefficients.
    """
    if not mpi_poses:
        raise ValueError("need at least one MPI pose")
    if not np.all(np.isfinite(target.translation)):
        raise ValueError("target translation is not finite")
    translations = np.stack([p.translation for p in mpi_poses])

    if mode == GRID_BILINEAR:
        return BlendWeights(tuple(_grid_bilinear(target, translations)), mode)
    if mode != IRREGULAR_EXPONENTIAL:
        raise ValueError(f"unknown blend mode {mode!r}")

    if focal_px is None or num_planes is None or z_min is None:
        raise ValueError("irregular mode requires focal_px, num_planes and z_min")
    gamma = blend_gamma(focal_px, num_planes, z_min)
    k = min(DEFAULT_IRREGULAR_NEIGHBORS if neighbors is None else neighbors, len(mpi_poses))
    if k < 1:
        raise ValueError("neighbor count must be >= 1")
    dist = np.linalg.norm(translations - target.translation, axis=1)
    order = np.lexsort((np.arange(len(dist)), dist))[:k]
    entries = tuple((int(i), float(np.exp(-gamma * dist[i]))) for i in order)
    return BlendWeights(entries, mode, gamma=gamma)


def fuse(renders: Sequence[RenderOutput], weights: BlendWeights) -> FusedView:
    """Alpha-modulated normalized blend of MPI renders (one per weight entry).

    Per pixel: C = sum w*a*C / sum w*a wherever the modulated weight mass
    is at least COVERAGE_EPS; the result is a convex combination of the
    render colors, and a render with a = 0 contributes nothing.  Where
    every render is transparent the blend is undefined; those pixels fall
    back to the unmodulated average of the premultiplied colors,
    sum w*C / sum w, and are flagged with coverage 0.
    """
    renders = list(renders)
    if not renders:
        raise ValueError("no renders to fuse")
    if len(renders) != len(weights.entries):
        raise ValueError(f"{len(renders)} renders for {len(weights.entries)} weights")
    shape = renders[0].rgb.shape
    for r in renders:
        if r.rgb.shape != shape:
            raise ValueError("render dimensions differ")
    ws = weights.weights()
    # r.rgb is premultiplied, so w * rgb is already the alpha-modulated
    # color term w * a * C; dividing by sum(w * a) recovers a seamless
    # convex combination of the render colors.
    num = np.zeros(shape, dtype=np.float64)
    den = np.zeros(shape[:2], dtype=np.float64)
    for w, r in zip(ws, renders):
        num += w * r.rgb
        den += w * r.alpha
    w_sum = float(ws.sum())
    covered = den >= COVERAGE_EPS
    denom = np.where(covered, den, w_sum)
    rgb = np.clip(num / denom[..., None], 0.0, 1.0)
    coverage = np.where(covered, den, 0.0)
    return FusedView(rgb, coverage)


def render_novel_view(mpis: Sequence[Mpi], target: Camera, mode: str = IRREGULAR_EXPONENTIAL,
                      *, neighbors: int | None = None,
                      counter: RenderCounter | None = None) -> FusedView:
    """Select neighbors, render each, and fuse.  Deterministic given inputs."""
    mpis = list(mpis)
    if not mpis:
        raise ValueError("need at least one MPI")
    ref = mpis[0]
    near_disp = float(ref.depth_planes[-1])
    weights = blend_weights(
        target.pose, [m.camera.pose for m in mpis], mode,
        focal_px=ref.camera.intrinsics.focal_px,
        num_planes=ref.num_planes,
        z_min=1.0 / near_disp if near_disp > 0 else 1.0,
        neighbors=neighbors,
    )
    renders = [render_mpi(mpis[i], target, counter=counter) for i in weights.indices()]
    return fuse(renders, weights)
