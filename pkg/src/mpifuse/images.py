"""PNG ingestion and emission: 8-bit and 16-bit, values scaled to [0, 1].

Files are written atomically (encode to bytes, temp file + rename) so
partially written frames never appear under their final name.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np


def load_png(path: str | Path) -> np.ndarray:
    """Load a PNG as float64 in [0, 1], shape (H, W, C) with C in {1, 3, 4}."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"cannot read image {path}")
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    data = raw.astype(np.float64) / scale
    if data.ndim == 2:
        data = data[..., None]
    elif data.shape[2] == 3:
        data = data[..., ::-1]          # BGR -> RGB
    elif data.shape[2] == 4:
        data = data[..., [2, 1, 0, 3]]  # BGRA -> RGBA
    return np.clip(np.ascontiguousarray(data), 0.0, 1.0)


def save_png(path: str | Path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Save a float image in [0, 1] as PNG (grayscale, RGB or RGBA)."""
    path = Path(path)
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[..., ::-1]
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., [2, 1, 0, 3]]
    if bit_depth == 8:
        q = np.round(arr * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        q = np.round(arr * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(q))
    if not ok:
        raise ValueError(f"PNG encoding failed for {path}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.tobytes())
    tmp.replace(path)
