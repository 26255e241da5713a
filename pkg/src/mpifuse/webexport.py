"""Viewer bundle export: a JSON manifest plus one 8-bit RGBA PNG per plane.

The manifest carries everything the browser viewer needs (cameras in
pose-file field order, ascending disparities, blending mode and its
precomputed falloff constant) so the viewer never re-derives sampling
math.  Plane files are named ``mpi_<k>/plane_<ddd>.png``, far to near.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

from .fusion import GRID_BILINEAR, IRREGULAR_EXPONENTIAL, blend_gamma
from .geometry import camera_to_record
from .images import save_png
from .mpi import Mpi

MANIFEST_VERSION = 1


def write_web_bundle(mpis: Sequence[Mpi], out_dir: str | Path,
                     mode: str = IRREGULAR_EXPONENTIAL, neighbors: int = 5) -> Path:
    """Write ``manifest.json`` and per-plane PNGs; returns the manifest path."""
    mpis = list(mpis)
    if not mpis:
        raise ValueError("need at least one MPI")
    if mode not in (GRID_BILINEAR, IRREGULAR_EXPONENTIAL):
        raise ValueError(f"unknown blend mode {mode!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ref = mpis[0]
    z_min = ref.z_min
    z_max = ref.z_max
    gamma = None
    if mode == IRREGULAR_EXPONENTIAL:
        gamma = blend_gamma(ref.camera.intrinsics.focal_px, ref.num_planes, z_min)

    entries = []
    for k, mpi in enumerate(mpis):
        sub = out_dir / f"mpi_{k:03d}"
        sub.mkdir(exist_ok=True)
        names = []
        for d in range(mpi.num_planes):
            name = f"mpi_{k:03d}/plane_{d:03d}.png"
            save_png(out_dir / name, mpi.planes[d], bit_depth=8)
            names.append(name)
        entries.append({
            "camera": [float(v) for v in camera_to_record(mpi.camera)],
            "disparities": [float(d) for d in mpi.depth_planes],
            "planes": names,
        })

    manifest = {
        "version": MANIFEST_VERSION,
        "width_px": ref.camera.intrinsics.width_px,
        "height_px": ref.camera.intrinsics.height_px,
        "z_min": z_min,
        "z_max": None if math.isinf(z_max) else z_max,
        "blend": {
            "mode": mode,
            "neighbors": neighbors,
            "gamma": gamma,
            "focal_px": ref.camera.intrinsics.focal_px,
            "num_planes": ref.num_planes,
        },
        "mpis": entries,
    }
    path = out_dir / "manifest.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    tmp.replace(path)
    return path
