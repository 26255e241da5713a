"""mpifuse: multiplane-image view synthesis with prescriptive capture planning.

Posed input views are expanded into multiplane images (MPIs); novel views
are rendered by homography-warping and alpha-compositing MPI planes and
blending neighboring MPIs with accumulated-alpha-modulated weights.  The
planner half turns light field sampling bounds into concrete capture
grids.
"""

from .build import (LayeredScene, Layer, Psv, build_mpi_groundtruth,
                    build_mpi_photoconsistency, build_psv, load_scene,
                    make_random_scene, render_layered_scene, save_scene)
from .bundle import BundleFormatError, export_mpi, import_mpi
from .evaluate import (MetricReport, ablation_render, epipolar_slice, lfi_render,
                       mean_scene_disparity, psnr, ssim)
from .fusion import (GRID_BILINEAR, IRREGULAR_EXPONENTIAL, BlendWeights, FusedView,
                     LatticeError, blend_gamma, blend_weights, fuse, render_novel_view)
from .geometry import (BehindCameraError, Camera, Intrinsics, Pose, load_cameras,
                       pixel_disparity, plane_homography, project, save_cameras,
                       unproject)
from .mpi import (Mpi, RenderCounter, RenderOutput, composite_over,
                  plane_disparities, render_mpi)
from .planner import (CapturePlan, CapturePlanRequest, ComplexityReport,
                      DegenerateSceneError, PlanInfeasibleError, SamplingConfig,
                      capture_plan, complexity, disparity_bound, fov_interval,
                      max_interval, mpi_interval, nyquist_interval)

__version__ = "0.1.0"
