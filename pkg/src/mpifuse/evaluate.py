"""Image quality metrics, the single-plane interpolation baseline, blending
ablations, and epipolar slice extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal

from .fusion import IRREGULAR_EXPONENTIAL, blend_weights, fuse, render_novel_view
from .geometry import Camera
from .mpi import Mpi, render_mpi

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])  # Rec. 601


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB over all channels, data range 1.0.

    Identical images report +inf.  ``mask`` optionally restricts the error
    average to selected pixels.
    """
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2
    if mask is not None:
        if mask.shape != a.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} does not match image {a.shape}")
        if not mask.any():
            raise ValueError("mask selects no pixels")
        diff = diff[mask]
    mse = float(diff.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _luma(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.shape[2] == 1:
        return image[..., 0]
    return image[..., :3] @ LUMA_WEIGHTS


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity on luma: 11x11 Gaussian window (sigma 1.5),
    K1=0.01, K2=0.03, data range 1.0, averaged over valid window positions."""
    ya, yb = _luma(a), _luma(b)
    if ya.shape != yb.shape:
        raise ValueError(f"image shapes differ: {ya.shape} vs {yb.shape}")
    if min(ya.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}px on each side")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def filt(x):
        return signal.convolve2d(x, win, mode="valid")

    mu_a = filt(ya)
    mu_b = filt(yb)
    var_a = filt(ya * ya) - mu_a * mu_a
    var_b = filt(yb * yb) - mu_b * mu_b
    cov = filt(ya * yb) - mu_a * mu_b
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    score = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
             / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)))
    return float(score.mean())


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    frame_psnr: list[float] = field(default_factory=list)
    frame_ssim: list[float] = field(default_factory=list)

    @classmethod
    def from_frames(cls, rendered: Sequence[np.ndarray],
                    reference: Sequence[np.ndarray]) -> "MetricReport":
        if len(rendered) != len(reference) or not rendered:
            raise ValueError("need equal, non-empty frame lists")
        ps = [psnr(r, g) for r, g in zip(rendered, reference)]
        ss = [ssim(r, g) for r, g in zip(rendered, reference)]
        return cls(psnr=float(np.mean(ps)), ssim=float(np.mean(ss)),
                   frame_psnr=ps, frame_ssim=ss)


def write_metrics_csv(report: MetricReport, path: str | Path) -> None:
    lines = ["frame,psnr,ssim"]
    for i, (p, s) in enumerate(zip(report.frame_psnr, report.frame_ssim)):
        lines.append(f"{i},{p:.6f},{s:.6f}" if math.isfinite(p) else f"{i},inf,{s:.6f}")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def mean_scene_disparity(z_min: float, z_max: float) -> float:
    """Average of the extreme disparities; the single reprojection plane for LFI."""
    far = 0.0 if math.isinf(z_max) else 1.0 / z_max
    return (1.0 / z_min + far) / 2.0


def lfi_render(sources: Sequence[tuple[Camera, np.ndarray]], target: Camera,
               mean_disparity: float, mode: str = IRREGULAR_EXPONENTIAL, *,
               num_planes: int = 1, z_min: float | None = None,
               neighbors: int | None = None) -> np.ndarray:
    """Light field interpolation: warp nearby views to one shared disparity plane
    and blend them with the standard fusion weights (alpha = warp validity).

    Each source becomes a single fully-opaque plane at ``mean_disparity``
    in its own frustum, so this reuses the D=1 path of the MPI renderer.
    ``num_planes``/``z_min`` only shape the irregular blending falloff and
    default to the trivial single-plane configuration.
    """
    if mean_disparity <= 0:
        raise ValueError("mean_disparity must be positive")
    if not sources:
        raise ValueError("need at least one source view")
    mpis = []
    for cam, image in sources:
        plane = np.concatenate([np.asarray(image, dtype=np.float64),
                                np.ones(image.shape[:2] + (1,))], axis=-1)
        mpis.append(Mpi(cam, np.array([mean_disparity]), plane[None]))
    weights = blend_weights(
        target.pose, [m.camera.pose for m in mpis], mode,
        focal_px=sources[0][0].intrinsics.focal_px,
        num_planes=num_planes,
        z_min=(1.0 / mean_disparity) if z_min is None else z_min,
        neighbors=neighbors,
    )
    renders = [render_mpi(mpis[i], target) for i in weights.indices()]
    return fuse(renders, weights).rgb


ABLATION_MODES = ("single", "average", "full")


def ablation_render(mpis: Sequence[Mpi], target: Camera, mode: str,
                    blend_mode: str = IRREGULAR_EXPONENTIAL, *,
                    neighbors: int | None = None) -> np.ndarray:
    """Render with the full pipeline or one of its two ablations.

    ``single`` uses only the nearest MPI; ``average`` blends neighbors with
    the accumulated alphas replaced by 1 (plain weighted average); ``full``
    is the alpha-modulated blend.
    """
    mpis = list(mpis)
    if not mpis:
        raise ValueError("need at least one MPI")
    if mode not in ABLATION_MODES:
        raise ValueError(f"mode must be one of {ABLATION_MODES}, got {mode!r}")
    if mode == "full":
        return render_novel_view(mpis, target, blend_mode, neighbors=neighbors).rgb
    if mode == "single":
        dist = [float(np.linalg.norm(m.camera.pose.translation - target.pose.translation))
                for m in mpis]
        nearest = int(np.lexsort((np.arange(len(dist)), dist))[0])
        return render_mpi(mpis[nearest], target).rgb
    ref = mpis[0]
    near_disp = float(ref.depth_planes[-1])
    weights = blend_weights(
        target.pose, [m.camera.pose for m in mpis], blend_mode,
        focal_px=ref.camera.intrinsics.focal_px, num_planes=ref.num_planes,
        z_min=1.0 / near_disp if near_disp > 0 else 1.0, neighbors=neighbors,
    )
    ws = weights.weights()
    acc = None
    for w, idx in zip(ws, weights.indices()):
        r = render_mpi(mpis[idx], target)
        acc = w * r.rgb if acc is None else acc + w * r.rgb
    return np.clip(acc / ws.sum(), 0.0, 1.0)


def epipolar_slice(frames: Sequence[np.ndarray], row: int) -> np.ndarray:
    """Stack one scanline from each frame of a camera path into an image.

    Scene depth shows up as stripe slope: disparity per frame step.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    shape = frames[0].shape
    for f in frames:
        if f.shape != shape:
            raise ValueError("frames must share dimensions")
    if not 0 <= row < shape[0]:
        raise ValueError(f"row {row} out of range for height {shape[0]}")
    return np.stack([f[row] for f in frames])
