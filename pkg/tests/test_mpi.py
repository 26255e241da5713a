import logging

import numpy as np
import pytest

from mpifuse.geometry import Camera, Intrinsics, Pose
from mpifuse.mpi import (Mpi, RenderCounter, composite_over, over, plane_disparities,
                         premultiply, render_mpi, sample_bilinear)

from conftest import oracle_bilinear, oracle_render_rays, random_camera


def make_camera(width=64, height=48, focal=None, x=0.0, y=0.0, z=0.0):
    focal = focal if focal is not None else float(width)
    intr = Intrinsics(focal, width, height, width / 2.0, height / 2.0)
    return Camera(intr, Pose.at(x, y, z))


def random_mpi(rng, camera=None, num_planes=8, z_min=1.0, z_max=10.0):
    cam = camera or make_camera()
    k = cam.intrinsics
    planes = rng.uniform(0.0, 1.0, size=(num_planes, k.height_px, k.width_px, 4))
    return Mpi(cam, plane_disparities(z_min, z_max, num_planes), planes)


class TestMpiType:
    def test_validates_disparity_order(self):
        cam = make_camera(4, 3)
        planes = np.zeros((2, 3, 4, 4))
        with pytest.raises(ValueError, match="increasing"):
            Mpi(cam, np.array([0.5, 0.2]), planes)

    def test_validates_value_range(self):
        cam = make_camera(4, 3)
        planes = np.full((1, 3, 4, 4), 1.5)
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            Mpi(cam, np.array([0.5]), planes)

    def test_validates_shape_against_intrinsics(self):
        cam = make_camera(4, 3)
        with pytest.raises(ValueError, match="shape"):
            Mpi(cam, np.array([0.5]), np.zeros((1, 4, 4, 4)))

    def test_single_plane_allowed(self):
        cam = make_camera(4, 3)
        mpi = Mpi(cam, np.array([0.5]), np.zeros((1, 3, 4, 4)))
        assert mpi.num_planes == 1
        assert mpi.z_min == 2.0

    def test_plane_disparities_endpoints(self):
        d = plane_disparities(1.0, 5.0, 4)
        assert d[0] == pytest.approx(0.2)
        assert d[-1] == pytest.approx(1.0)
        assert np.all(np.diff(d) > 0)
        assert plane_disparities(2.0, 8.0, 1) == pytest.approx([0.5])
        assert plane_disparities(1.0, np.inf, 3)[0] == 0.0


class TestCompositeOver:
    def test_single_opaque_plane(self, rng):
        plane = rng.uniform(0, 1, size=(5, 7, 4))
        plane[..., 3] = 1.0
        out = composite_over([plane])
        assert np.array_equal(out.rgb, plane[..., :3])
        assert np.all(out.alpha == 1.0)

    def test_two_planes_half_alpha(self, rng):
        back = rng.uniform(0, 1, size=(5, 7, 4))
        back[..., 3] = 1.0
        front = rng.uniform(0, 1, size=(5, 7, 4))
        front[..., 3] = 0.5
        out = composite_over([back, front])
        expect = 0.5 * front[..., :3] + 0.5 * back[..., :3]
        assert np.abs(out.rgb - expect).max() < 1e-12
        assert np.abs(out.alpha - 1.0).max() < 1e-12

    def test_all_transparent(self):
        planes = np.zeros((3, 5, 7, 4))
        out = composite_over(planes)
        assert np.all(out.rgb == 0.0)
        assert np.all(out.alpha == 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="inconsistent"):
            composite_over([np.zeros((2, 2, 4)), np.zeros((3, 2, 4))])

    def test_matches_explicit_sum_formula(self, rng):
        planes = rng.uniform(0, 1, size=(5, 4, 6, 4))
        out = composite_over(planes)
        d = planes.shape[0]
        rgb = np.zeros((4, 6, 3))
        transparency = np.ones((4, 6))
        for i in range(d):
            nearer = np.ones((4, 6))
            for j in range(i + 1, d):
                nearer *= 1.0 - planes[j, ..., 3]
            rgb += planes[i, ..., :3] * planes[i, ..., 3:4] * nearer[..., None]
            transparency *= 1.0 - planes[i, ..., 3]
        assert np.abs(out.rgb - rgb).max() < 1e-12
        assert np.abs(out.alpha - (1.0 - transparency)).max() < 1e-12


class TestOverProperties:
    def test_associativity(self, rng):
        for _ in range(300):
            a, b, c = (premultiply(rng.uniform(0, 1, size=(4, 5, 4))) for _ in range(3))
            left = over(over(a, b), c)
            right = over(a, over(b, c))
            assert np.abs(left - right).max() < 1e-6

    def test_alpha_monotone_and_bounded(self, rng):
        planes = rng.uniform(0, 1, size=(6, 4, 5, 4))
        prev = np.zeros((4, 5))
        for i in range(1, 7):
            alpha = composite_over(planes[:i]).alpha
            assert np.all(alpha >= prev - 1e-12)
            assert np.all((alpha >= 0.0) & (alpha <= 1.0))
            prev = alpha

    def test_premultiplied_bound(self, rng):
        planes = rng.uniform(0, 1, size=(5, 4, 5, 4))
        out = composite_over(planes)
        assert np.all(out.rgb <= out.alpha[..., None] + 1e-6)


class TestSampleBilinear:
    def test_matches_scalar_oracle(self, rng):
        image = rng.uniform(0, 1, size=(6, 9, 4))
        xs = rng.uniform(-2.0, 10.0, size=50)
        ys = rng.uniform(-2.0, 7.0, size=50)
        got = sample_bilinear(image, xs, ys)
        for i in range(50):
            assert np.abs(got[i] - oracle_bilinear(image, xs[i], ys[i])).max() < 1e-12

    def test_integer_coords_exact(self, rng):
        image = rng.uniform(0, 1, size=(6, 9, 4))
        xs, ys = np.meshgrid(np.arange(9.0), np.arange(6.0))
        got = sample_bilinear(image, xs, ys)
        assert np.array_equal(got, image)

    def test_outside_is_transparent(self, rng):
        image = rng.uniform(0, 1, size=(6, 9, 4))
        assert np.all(sample_bilinear(image, np.array([-1.5]), np.array([2.0])) == 0.0)
        assert np.all(sample_bilinear(image, np.array([9.0]), np.array([2.0])) == 0.0)


class TestRenderMpi:
    def test_reference_pose_is_exact_composite(self, rng):
        mpi = random_mpi(rng)
        out = render_mpi(mpi, mpi.camera)
        expect = composite_over(mpi.planes)
        assert np.array_equal(out.rgb, expect.rgb)
        assert np.array_equal(out.alpha, expect.alpha)

    def test_single_opaque_plane_translates(self, rng):
        # plane at 2 m, camera step 0.1 m, focal 100 px -> exactly 5 px shift
        cam = make_camera(width=64, height=48, focal=100.0)
        texture = rng.uniform(0, 1, size=(48, 64, 4))
        texture[..., 3] = 1.0
        mpi = Mpi(cam, np.array([0.5]), texture[None])
        target = make_camera(width=64, height=48, focal=100.0, x=0.1)
        out = render_mpi(mpi, target)
        shifted = texture[:, 5:, :3]
        assert np.abs(out.rgb[:, :-5] - shifted).max() < 1e-9
        assert np.abs(out.alpha[:, :-5] - 1.0).max() < 1e-9
        assert np.all(out.alpha[:, -4:] == 0.0)  # beyond the shifted frustum

    def test_matches_ray_oracle(self, rng):
        for _ in range(3):
            mpi = random_mpi(rng, num_planes=4)
            target = random_camera(rng, max_angle_rad=0.1, span=0.3)
            out = render_mpi(mpi, target)
            rgb, alpha = oracle_render_rays(mpi, target)
            assert np.abs(out.rgb - rgb).max() < 1e-5
            assert np.abs(out.alpha - alpha).max() < 1e-5

    def test_degenerate_plane_skipped(self, caplog):
        # target camera center sits exactly on the 1 m plane
        cam = make_camera()
        planes = np.ones((2, 48, 64, 4)) * 0.5
        mpi = Mpi(cam, np.array([0.5, 1.0]), planes)
        target = make_camera(z=1.0)
        with caplog.at_level(logging.WARNING, logger="mpifuse.mpi"):
            render_mpi(mpi, target)
        assert any("degenerate" in msg for msg in caplog.messages)

    def test_counter_counts_plane_pixels(self, rng):
        mpi = random_mpi(rng, num_planes=3)
        counter = RenderCounter()
        render_mpi(mpi, mpi.camera, counter=counter)
        assert counter.plane_pixels == 3 * 48 * 64
        counter2 = RenderCounter()
        render_mpi(mpi, make_camera(x=0.05), counter=counter2)
        assert counter2.plane_pixels == 3 * 48 * 64

    def test_translation_equivariance_single_plane_integer_shift(self, rng):
        """With D=1 and an integer-pixel warp, warping the straight plane then
        compositing equals compositing (premultiplying) then warping."""
        cam = make_camera(width=32, height=24, focal=100.0)
        plane = rng.uniform(0, 1, size=(24, 32, 4))
        mpi = Mpi(cam, np.array([0.5]), plane[None])
        target = make_camera(width=32, height=24, focal=100.0, x=0.1)  # -5 px
        warped_then_composited = render_mpi(mpi, target)

        pre = premultiply(plane)
        composited_then_warped = np.zeros_like(pre)
        composited_then_warped[:, :-5] = pre[:, 5:]
        assert np.abs(warped_then_composited.rgb
                      - composited_then_warped[..., :3]).max() < 1e-9
        assert np.abs(warped_then_composited.alpha
                      - composited_then_warped[..., 3]).max() < 1e-9
