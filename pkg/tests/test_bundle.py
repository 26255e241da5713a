import struct
from pathlib import Path

import numpy as np
import pytest

from mpifuse.bundle import (BundleFormatError, bundle_num_bytes, export_mpi,
                            import_mpi, read_meta)
from mpifuse.geometry import Camera, Intrinsics, Pose
from mpifuse.mpi import Mpi, plane_disparities

GOLDEN_PATH = Path(__file__).parent / "data" / "golden_2x2x1.mpib"


def golden_mpi() -> Mpi:
    cam = Camera(Intrinsics(1.5, 2, 2, 1.0, 0.75),
                 Pose(np.eye(3), np.array([0.25, -0.5, 1.0])))
    plane = np.array([[[0.0, 0.25, 0.5, 1.0], [0.125, 0.375, 0.625, 0.875]],
                      [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 0.5]]], dtype=np.float32)
    return Mpi(cam, np.array([0.5]), plane[None])


def golden_bytes() -> bytes:
    """The byte layout packed by hand, independent of the writer."""
    blob = b"MPIB1\n"
    blob += struct.pack("<III", 2, 2, 1)
    camera_record = [2.0, 2.0, 1.5, 1.0, 0.75,
                     1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
                     0.25, -0.5, 1.0]
    blob += struct.pack("<17d", *camera_record)
    blob += struct.pack("<1d", 0.5)
    plane_values = [0.0, 0.25, 0.5, 1.0, 0.125, 0.375, 0.625, 0.875,
                    1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5]
    blob += struct.pack("<16f", *plane_values)
    return blob


def random_mpi(rng, num_planes=3, width=5, height=4):
    cam = Camera(Intrinsics(7.0, width, height, width / 2, height / 2),
                 Pose.at(0.1, -0.2, 0.0))
    planes = rng.uniform(0, 1, size=(num_planes, height, width, 4)).astype(np.float32)
    return Mpi(cam, plane_disparities(1.0, 8.0, num_planes), planes)


class TestRoundTrip:
    def test_bit_identical(self, tmp_path, rng):
        mpi = random_mpi(rng)
        path = tmp_path / "m.mpib"
        export_mpi(mpi, path, z_min=1.0, z_max=8.0, source_id="test")
        back = import_mpi(path)
        assert np.array_equal(back.depth_planes, mpi.depth_planes)
        assert np.array_equal(back.planes, np.asarray(mpi.planes, dtype=np.float32))
        assert back.camera == mpi.camera
        # exporting the imported copy reproduces the same bytes
        path2 = tmp_path / "m2.mpib"
        export_mpi(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_file_size_formula(self, tmp_path, rng):
        for planes, w, h in [(1, 2, 2), (4, 7, 3), (6, 5, 9)]:
            mpi = random_mpi(rng, planes, w, h)
            path = tmp_path / f"m{planes}.mpib"
            export_mpi(mpi, path)
            assert path.stat().st_size == bundle_num_bytes(w, h, planes)

    def test_meta_sidecar(self, tmp_path, rng):
        mpi = random_mpi(rng)
        path = tmp_path / "m.mpib"
        export_mpi(mpi, path, z_min=1.0, z_max=8.0, source_id="img_003.png")
        meta = read_meta(path)
        assert meta["z_min"] == "1.0"
        assert meta["z_max"] == "8.0"
        assert meta["source_id"] == "img_003.png"
        assert (tmp_path / "m.meta.txt").exists()


class TestFormatErrors:
    def test_bad_magic_offset(self, tmp_path):
        path = tmp_path / "bad.mpib"
        path.write_bytes(b"NOPE!\n" + b"\x00" * 64)
        with pytest.raises(BundleFormatError, match="offset 0") as exc:
            import_mpi(path)
        assert exc.value.offset == 0

    def test_truncation_reports_offset(self, tmp_path, rng):
        mpi = random_mpi(rng)
        path = tmp_path / "m.mpib"
        export_mpi(mpi, path)
        blob = path.read_bytes()
        for cut in (3, 10, 20, 150, len(blob) - 7):
            short = tmp_path / "short.mpib"
            short.write_bytes(blob[:cut])
            with pytest.raises(BundleFormatError, match="offset") as exc:
                import_mpi(short)
            assert exc.value.offset <= cut

    def test_trailing_bytes_rejected(self, tmp_path, rng):
        mpi = random_mpi(rng)
        path = tmp_path / "m.mpib"
        export_mpi(mpi, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(BundleFormatError, match="trailing"):
            import_mpi(path)

    def test_unsorted_disparities_rejected(self, tmp_path):
        blob = golden_bytes()
        # grow to 2 planes with descending disparities
        two = blob[:6] + struct.pack("<III", 2, 2, 2)
        two += blob[6 + 12:6 + 12 + 136]                  # camera record
        two += struct.pack("<2d", 0.9, 0.5)               # not ascending
        two += blob[6 + 12 + 136 + 8:] * 2                # two planes of data
        path = tmp_path / "unsorted.mpib"
        path.write_bytes(two)
        with pytest.raises(BundleFormatError, match="ascending"):
            import_mpi(path)


class TestGolden:
    def test_checked_in_file_matches_hand_packed_bytes(self):
        assert GOLDEN_PATH.read_bytes() == golden_bytes()

    def test_export_reproduces_golden_exactly(self, tmp_path):
        path = tmp_path / "g.mpib"
        export_mpi(golden_mpi(), path)
        assert path.read_bytes() == golden_bytes()

    def test_import_golden(self):
        mpi = import_mpi(GOLDEN_PATH)
        want = golden_mpi()
        assert mpi.camera == want.camera
        assert np.array_equal(mpi.depth_planes, want.depth_planes)
        assert np.array_equal(mpi.planes, want.planes)
