"""Binary MPI bundle container.

Layout (all little-endian):

* magic bytes ``MPIB1\\n``
* 3 x uint32 header: W, H, D
* 17 x float64 camera record (pose-file field order:
  W H focal_px cx cy r00..r22 tx ty tz)
* D x float64 disparities, ascending (far to near)
* D*H*W*4 x float32 plane data, plane-major (far first), row-major,
  channel order RGBA

Plane data is stored as float32, so exporting an MPI quantizes wider
dtypes; export-then-import of float32 data is bit-exact.  A plain-text
``<stem>.meta.txt`` sidecar with ``key=value`` lines (z_min, z_max,
source image id) accompanies each bundle.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import CAMERA_RECORD_LEN, camera_from_record, camera_to_record
from .mpi import Mpi

MAGIC = b"MPIB1\n"
_HEADER = struct.Struct("<III")


class BundleFormatError(ValueError):
    """Malformed bundle; ``offset`` is the byte position of the violation."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def bundle_num_bytes(width_px: int, height_px: int, num_planes: int) -> int:
    """Exact file size: header plus 16 bytes per plane pixel."""
    header = len(MAGIC) + _HEADER.size + 8 * CAMERA_RECORD_LEN + 8 * num_planes
    return header + 16 * width_px * height_px * num_planes


def export_mpi(mpi: Mpi, path: str | Path, *, z_min: float | None = None,
               z_max: float | None = None, source_id: str | None = None) -> None:
    """Write an MPI bundle and its meta sidecar atomically."""
    path = Path(path)
    k = mpi.camera.intrinsics
    blob = bytearray()
    blob += MAGIC
    blob += _HEADER.pack(k.width_px, k.height_px, mpi.num_planes)
    blob += np.asarray(camera_to_record(mpi.camera), dtype="<f8").tobytes()
    blob += np.asarray(mpi.depth_planes, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(mpi.planes, dtype="<f4").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)

    meta = {
        "z_min": mpi.z_min if z_min is None else z_min,
        "z_max": mpi.z_max if z_max is None else z_max,
        "source_id": "" if source_id is None else source_id,
    }
    sidecar = path.with_name(path.stem + ".meta.txt")
    sidecar.write_text("".join(f"{key}={value}\n" for key, value in meta.items()))


def read_meta(path: str | Path) -> dict[str, str]:
    """Parse the key=value sidecar next to a bundle path."""
    path = Path(path)
    sidecar = path.with_name(path.stem + ".meta.txt")
    meta = {}
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            if "=" in line:
                key, value = line.split("=", 1)
                meta[key.strip()] = value.strip()
    return meta


def import_mpi(path: str | Path) -> Mpi:
    """Read a bundle written by :func:`export_mpi` (or any conforming producer)."""
    data = Path(path).read_bytes()
    off = 0

    def need(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise BundleFormatError(f"truncated bundle: {what} needs {n} bytes, "
                                    f"{len(data) - off} left", off)
        chunk = data[off:off + n]
        off += n
        return chunk

    if need(len(MAGIC), "magic") != MAGIC:
        raise BundleFormatError(f"bad magic bytes, expected {MAGIC!r}", 0)
    width, height, depth = _HEADER.unpack(need(_HEADER.size, "header"))
    if width < 1 or height < 1 or depth < 1:
        raise BundleFormatError(f"bad dimensions {width}x{height}x{depth}", len(MAGIC))
    record = np.frombuffer(need(8 * CAMERA_RECORD_LEN, "camera record"), dtype="<f8")
    camera = camera_from_record(record)
    if camera.intrinsics.width_px != width or camera.intrinsics.height_px != height:
        raise BundleFormatError("camera record size disagrees with header",
                                len(MAGIC) + _HEADER.size)
    disp_off = off
    disparities = np.frombuffer(need(8 * depth, "disparities"), dtype="<f8")
    if depth > 1 and np.any(np.diff(disparities) <= 0):
        raise BundleFormatError("disparities are not strictly ascending", disp_off)
    planes = np.frombuffer(need(16 * width * height * depth, "plane data"), dtype="<f4")
    if off != len(data):
        raise BundleFormatError(f"{len(data) - off} trailing bytes", off)
    planes = planes.reshape(depth, height, width, 4)
    return Mpi(camera, disparities.copy(), planes.copy())
