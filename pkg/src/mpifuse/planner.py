"""Camera sampling bounds and capture planning for layered view synthesis.

Implements the view-spacing rules that make MPI blending alias-free:

* the Nyquist camera interval for a light field with occlusions,
* its D-fold relaxation when each view is expanded to D depth planes,
* the field-of-view overlap bound (every scene point seen by >= 2 views),
* the image-space form of the limit: at most min(D, W/2) pixels of
  disparity for the nearest scene point between adjacent views,
* a user-facing capture planner and rendering/storage cost model.

All distances in meters, frequencies in cycles/meter, angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DISPARITY_CAP_PX = 64  # empirical per-view-pair disparity limit (pixels)


class DegenerateSceneError(ValueError):
    """Scene depth range is empty; the sampling interval is unbounded."""


class PlanInfeasibleError(ValueError):
    """Requested capture cannot satisfy the disparity cap; carries the minimal N."""

    def __init__(self, message: str, minimal_views: int):
        super().__init__(message)
        self.minimal_views = minimal_views


@dataclass(frozen=True)
class SamplingConfig:
    """Scene and camera parameters entering the sampling bounds.

    ``scene_freq_limit`` is the highest spatial frequency present in the
    continuous light field (cycles/meter); when omitted the sensor sampling
    limit 1/(2 * pixel_size_m) applies alone.
    """

    num_planes: int
    width_px: int
    focal_m: float
    pixel_size_m: float
    z_min: float
    z_max: float = math.inf
    scene_freq_limit: float | None = None

    def __post_init__(self):
        if self.num_planes < 1:
            raise ValueError("num_planes must be >= 1")
        if self.width_px < 1:
            raise ValueError("width_px must be >= 1")
        for name in ("focal_m", "pixel_size_m", "z_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.z_max < self.z_min:
            raise ValueError(f"z_max {self.z_max} < z_min {self.z_min}")
        if self.scene_freq_limit is not None and self.scene_freq_limit <= 0:
            raise ValueError("scene_freq_limit must be positive")

    @classmethod
    def from_fov(cls, fov_x_rad: float, width_px: int, z_min: float,
                 z_max: float = math.inf, num_planes: int = 1,
                 pixel_size_m: float = 2e-6) -> "SamplingConfig":
        """Build from a horizontal field of view; only focal/pixel ratios matter."""
        focal_m = width_px * pixel_size_m / (2.0 * math.tan(fov_x_rad / 2.0))
        return cls(num_planes, width_px, focal_m, pixel_size_m, z_min, z_max)

    @property
    def sampled_freq_limit(self) -> float:
        """Highest representable spatial frequency (cycles/meter)."""
        sensor = 1.0 / (2.0 * self.pixel_size_m)
        if self.scene_freq_limit is None:
            return sensor
        return min(self.scene_freq_limit, sensor)

    @property
    def focal_px(self) -> float:
        return self.focal_m / self.pixel_size_m

    def disparity_at_spacing(self, spacing_m: float) -> float:
        """Pixel disparity of the nearest scene point between views spacing_m apart."""
        return spacing_m * self.focal_px / self.z_min


def nyquist_interval(cfg: SamplingConfig) -> float:
    """Maximum alias-free camera spacing for single-plane reconstruction (meters)."""
    inv_span = 1.0 / cfg.z_min - (0.0 if math.isinf(cfg.z_max) else 1.0 / cfg.z_max)
    den = 2.0 * cfg.sampled_freq_limit * cfg.focal_m * inv_span
    if den <= 0.0:
        raise DegenerateSceneError("z_min equals z_max: sampling interval is unbounded")
    return 1.0 / den


def mpi_interval(cfg: SamplingConfig) -> float:
    """Camera spacing bound with D depth planes: exactly D times the Nyquist interval."""
    return cfg.num_planes * nyquist_interval(cfg)


def fov_interval(cfg: SamplingConfig) -> float:
    """Spacing above which scene points at z_min stop appearing in >= 2 frustums."""
    return cfg.width_px * cfg.pixel_size_m * cfg.z_min / (2.0 * cfg.focal_m)


def max_interval(cfg: SamplingConfig) -> float:
    """Overall camera spacing bound: both constraints must hold."""
    return min(mpi_interval(cfg), fov_interval(cfg))


def disparity_bound(num_planes: int, width_px: int) -> float:
    """Largest admissible adjacent-view disparity in pixels: min(D, W/2)."""
    if num_planes < 1 or width_px < 1:
        raise ValueError("num_planes and width_px must be >= 1")
    return min(float(num_planes), width_px / 2.0)


@dataclass(frozen=True)
class CapturePlanRequest:
    """Planar capture request: fix exactly one of width_px / num_views.

    ``side_m`` is the side length of the square view plane the user wants
    to explore; ``max_views`` optionally limits how dense a grid the user
    will tolerate.
    """

    fov_x_rad: float
    side_m: float
    z_min: float
    width_px: int | None = None
    num_views: int | None = None
    max_views: int | None = None

    def __post_init__(self):
        if not (0.0 < self.fov_x_rad < math.pi):
            raise ValueError(f"field of view must be in (0, pi), got {self.fov_x_rad}")
        if self.side_m <= 0:
            raise ValueError("side_m must be positive")
        if self.z_min <= 0:
            raise ValueError("z_min must be positive")
        if (self.width_px is None) == (self.num_views is None):
            raise ValueError("fix exactly one of width_px / num_views")
        if self.width_px is not None and self.width_px < 1:
            raise ValueError("width_px must be >= 1")
        if self.num_views is not None and self.num_views < 4:
            raise ValueError("num_views must be >= 4")


@dataclass(frozen=True)
class CapturePlan:
    """Concrete capture grid: view count, spacing, plane count and positions."""

    num_views: int
    per_side: int
    spacing_m: float
    width_px: int
    num_planes: int
    max_disparity_px: float  # achieved between adjacent planned views at z_min
    positions: np.ndarray = field(repr=False)  # (N, 2) view-plane coords, meters
    render_ops_per_mpi: int
    storage_samples: int

    def __post_init__(self):
        if self.num_views < 4:
            raise ValueError("a plan needs at least a 2x2 grid")
        if self.per_side ** 2 != self.num_views:
            raise ValueError("num_views must be a perfect square")
        p = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", p)
        if p.shape != (self.num_views, 2):
            raise ValueError(f"positions shape {p.shape} != ({self.num_views}, 2)")
        p.flags.writeable = False


def _grid_positions(per_side: int, side_m: float) -> np.ndarray:
    """Centered per_side x per_side grid spanning the view plane inclusively."""
    coords = np.linspace(-side_m / 2.0, side_m / 2.0, per_side)
    xx, yy = np.meshgrid(coords, coords)
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def capture_plan(req: CapturePlanRequest,
                 max_disparity_px: int = DEFAULT_DISPARITY_CAP_PX) -> CapturePlan:
    """Solve the free variable of a capture request.

    Enforces W / sqrt(N) <= 2 * cap * z_min * tan(fov/2) / S, rounds the
    view count up to the next perfect square, then spaces views to span the
    plane inclusively (spacing = S / (per_side - 1)).  The recommended
    plane count is the achieved adjacent-view disparity rounded up, clamped
    to the cap and to W/2.
    """
    ratio_cap = 2.0 * max_disparity_px * req.z_min * math.tan(req.fov_x_rad / 2.0) / req.side_m

    if req.width_px is not None:
        width_px = req.width_px
        sqrt_n = width_px / ratio_cap
        per_side = max(2, math.ceil(sqrt_n - 1e-12))
        num_views = per_side ** 2
        if req.max_views is not None and num_views > req.max_views:
            raise PlanInfeasibleError(
                f"width {width_px} px needs at least {num_views} views "
                f"({per_side}x{per_side}) but the request allows {req.max_views}",
                minimal_views=num_views)
    else:
        num_views = req.num_views
        width_px = math.floor(ratio_cap * math.sqrt(num_views) + 1e-12)
        if width_px < 1:
            minimal = max(4, math.ceil(1.0 / ratio_cap) ** 2)
            raise PlanInfeasibleError(
                f"{num_views} views cannot support even a 1 px wide image; "
                f"need at least {minimal} views", minimal_views=minimal)
        per_side = math.ceil(math.sqrt(num_views) - 1e-12)
        num_views = per_side ** 2

    spacing = req.side_m / (per_side - 1)
    focal_px = width_px / (2.0 * math.tan(req.fov_x_rad / 2.0))
    achieved = spacing * focal_px / req.z_min
    num_planes = int(min(max(1, math.ceil(achieved - 1e-9)), max_disparity_px, width_px // 2 or 1))
    render_ops = width_px ** 2 * num_planes
    return CapturePlan(
        num_views=num_views,
        per_side=per_side,
        spacing_m=spacing,
        width_px=width_px,
        num_planes=num_planes,
        max_disparity_px=achieved,
        positions=_grid_positions(per_side, req.side_m),
        render_ops_per_mpi=render_ops,
        storage_samples=render_ops * num_views,
    )


@dataclass(frozen=True)
class ComplexityReport:
    """Exact per-MPI rendering work and total storage, plus their closed forms.

    ``render_ops_per_mpi`` counts composited plane pixels (W^2 * D) and
    ``storage_samples`` the RGBA samples across all MPIs (W^2 * D * N).
    The closed forms W^3 S / (2 sqrt(N) z_min tan(fov/2)) and its
    N-multiple expose the cubic-in-width, square-root-in-views scaling.
    """

    width_px: int
    num_views: int
    num_planes: int
    render_ops_per_mpi: int
    storage_samples: int
    render_ops_closed_form: float
    storage_closed_form: float


def complexity(width_px: int, num_views: int, side_m: float, z_min: float,
               fov_x_rad: float,
               max_disparity_px: int = DEFAULT_DISPARITY_CAP_PX) -> ComplexityReport:
    """Cost model for a W-pixel render over an N-view inclusive grid."""
    if width_px < 1 or num_views < 4:
        raise ValueError("need width_px >= 1 and num_views >= 4")
    per_side = math.ceil(math.sqrt(num_views) - 1e-12)
    spacing = side_m / (per_side - 1)
    focal_px = width_px / (2.0 * math.tan(fov_x_rad / 2.0))
    achieved = spacing * focal_px / z_min
    num_planes = int(min(max(1, math.ceil(achieved - 1e-9)), max_disparity_px, width_px // 2 or 1))
    render_ops = width_px ** 2 * num_planes
    closed = width_px ** 3 * side_m / (2.0 * math.sqrt(num_views) * z_min
                                       * math.tan(fov_x_rad / 2.0))
    return ComplexityReport(
        width_px=width_px,
        num_views=num_views,
        num_planes=num_planes,
        render_ops_per_mpi=render_ops,
        storage_samples=render_ops * num_views,
        render_ops_closed_form=closed,
        storage_closed_form=closed * num_views,
    )
