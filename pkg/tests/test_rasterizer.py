"""Tests for depth rasterisation, silhouettes and synthetic frames."""
import unittest

import numpy as np

from fantrack.core.errors import DegenerateMesh
from fantrack.core.geometry import CameraIntrinsics, Pose, axis_angle_rotation
from fantrack.core.mesh import TriangleMesh, make_sphere
from fantrack.services.rasterizer import (
    INVALID_DEPTH,
    SyntheticOptions,
    mask_from_depth,
    rasterize_depth,
    render_synthetic_frame,
    silhouette_mask,
)

# pixel = 100 * X / Z + 10, exact for the coordinates used below
K_EXACT = CameraIntrinsics(100.0, 100.0, 10.0, 10.0)
SQUARE = np.array([(0, 0, 0), (0.25, 0, 0), (0.25, 0.25, 0), (0, 0.25, 0)], dtype=float)
AT_ONE_METER = Pose(np.eye(3), [0.0, 0.0, 1.0])


class TestRasterizeDepth(unittest.TestCase):

    def test_shared_edge_is_drawn_once(self):
        first = rasterize_depth(TriangleMesh(SQUARE, [[0, 1, 2]]), K_EXACT, AT_ONE_METER, 64, 64)
        second = rasterize_depth(TriangleMesh(SQUARE, [[0, 2, 3]]), K_EXACT, AT_ONE_METER, 64, 64)

        self.assertFalse(np.any(first.valid & second.valid))
        # half-open square covering pixels 10..35 on both axes
        self.assertEqual(np.count_nonzero(first.valid | second.valid), 25 * 25)

    def test_flat_square_depth(self):
        depth = rasterize_depth(TriangleMesh(SQUARE, [[0, 1, 2], [0, 2, 3]]), K_EXACT, AT_ONE_METER, 64, 64)
        np.testing.assert_allclose(depth.depth[depth.valid], 1.0, rtol=1e-12)
        self.assertTrue(np.all(depth.depth[~depth.valid] == INVALID_DEPTH))
        self.assertTrue(np.all(depth.triangle_index[~depth.valid] == -1))

    def test_nearest_surface_wins(self):
        far = SQUARE + [0.0, 0.0, 1.0]
        vertices = np.vstack([far, SQUARE])
        # far square first, then the near one
        mesh = TriangleMesh(vertices, [[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]])
        depth = rasterize_depth(mesh, K_EXACT, AT_ONE_METER, 64, 64)
        np.testing.assert_allclose(depth.depth[depth.valid], 1.0, rtol=1e-12)
        self.assertTrue(np.all(depth.triangle_index[depth.valid] >= 2))

    def test_exact_tie_keeps_lower_index(self):
        mesh = TriangleMesh(SQUARE, [[0, 1, 2], [0, 1, 2]])
        depth = rasterize_depth(mesh, K_EXACT, AT_ONE_METER, 64, 64)
        self.assertTrue(np.all(depth.triangle_index[depth.valid] == 0))

    def test_all_behind_camera(self):
        behind = Pose(np.eye(3), [0.0, 0.0, -1.0])
        with self.assertRaises(DegenerateMesh):
            rasterize_depth(TriangleMesh(SQUARE, [[0, 1, 2]]), K_EXACT, behind, 64, 64)

    def test_outside_image_is_empty(self):
        shifted = Pose(np.eye(3), [5.0, 0.0, 1.0])
        depth = rasterize_depth(TriangleMesh(SQUARE, [[0, 1, 2]]), K_EXACT, shifted, 64, 64)
        self.assertEqual(mask_from_depth(depth).count(), 0)

    def test_sphere_front_is_two_meters_away(self):
        K = CameraIntrinsics(200.0, 200.0, 100.0, 100.0)
        depth = rasterize_depth(make_sphere(1.0, level=3), K, Pose(np.eye(3), [0.0, 0.0, 3.0]), 201, 201)
        nearest = depth.depth[depth.valid].min()
        # facets lie inside the sphere, never in front of it
        self.assertGreaterEqual(nearest, 2.0 - 1e-9)
        self.assertLess(nearest, 2.01)

    def test_random_planes_match_ray_intersection(self):
        K = CameraIntrinsics(300.0, 300.0, 80.0, 60.0)
        quad = np.array([(-0.2, -0.2, 0), (0.2, -0.2, 0), (0.2, 0.2, 0), (-0.2, 0.2, 0)], dtype=float)
        mesh = TriangleMesh(quad, [[0, 1, 2], [0, 2, 3]])
        rng = np.random.default_rng(8)
        cols, rows = np.meshgrid(np.arange(160.0), np.arange(120.0))
        rays = np.stack([(cols - K.cx) / K.fx, (rows - K.cy) / K.fy, np.ones_like(cols)], axis=-1)
        for _ in range(10):
            axis = np.append(rng.normal(size=2), 0.0)
            T = Pose(axis_angle_rotation(axis, rng.uniform(0.0, np.radians(60.0))),
                     [rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(1.0, 2.0)])
            depth = rasterize_depth(mesh, K, T, 160, 120)
            n = T.rotation[:, 2]
            expected = (n @ T.translation) / (rays @ n)
            self.assertGreater(depth.valid.sum(), 100)
            np.testing.assert_allclose(depth.depth[depth.valid], expected[depth.valid], rtol=1e-5)

    def test_triangle_order_does_not_change_depth(self):
        mesh = make_sphere(0.05, level=2)
        K = CameraIntrinsics(150.0, 150.0, 79.5, 63.5)
        T = Pose(axis_angle_rotation([1.0, 2.0, 0.5], 0.7), [0.01, 0.0, 0.3])
        reference = rasterize_depth(mesh, K, T, 160, 128)
        rng = np.random.default_rng(9)
        for _ in range(3):
            shuffled = TriangleMesh(mesh.vertices, mesh.triangles[rng.permutation(len(mesh.triangles))])
            depth = rasterize_depth(shuffled, K, T, 160, 128)
            np.testing.assert_array_equal(depth.valid, reference.valid)
            np.testing.assert_allclose(depth.depth, reference.depth, rtol=1e-12)


class TestSilhouette(unittest.TestCase):

    def setUp(self):
        self.mesh = make_sphere(0.05, level=2)
        self.K = CameraIntrinsics(150.0, 150.0, 79.5, 63.5)
        self.T = Pose(np.eye(3), [0.0, 0.0, 0.3])

    def test_matches_depth_mask(self):
        depth_mask = mask_from_depth(rasterize_depth(self.mesh, self.K, self.T, 160, 128)).data
        polygon_mask = silhouette_mask(self.mesh, self.K, self.T, 160, 128)
        iou = np.count_nonzero(depth_mask & polygon_mask) / np.count_nonzero(depth_mask | polygon_mask)
        self.assertGreater(iou, 0.9)

    def test_area_close_to_disc(self):
        mask = silhouette_mask(self.mesh, self.K, self.T, 160, 128)
        radius_px = 150.0 * 0.05 / 0.3
        self.assertAlmostEqual(np.count_nonzero(mask) / (np.pi * radius_px**2), 1.0, delta=0.12)


class TestSyntheticFrame(unittest.TestCase):

    def setUp(self):
        self.mesh = make_sphere(0.05, level=2)
        self.K = CameraIntrinsics(150.0, 150.0, 79.5, 63.5)
        self.T = Pose(np.eye(3), [0.0, 0.0, 0.3])
        self.background = np.full((128, 160, 3), (20, 120, 40), dtype=np.uint8)
        self.covered = mask_from_depth(rasterize_depth(self.mesh, self.K, self.T, 160, 128)).data

    def test_object_over_background(self):
        frame = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40))
        self.assertEqual(frame.dtype, np.uint8)
        np.testing.assert_array_equal(frame[~self.covered], self.background[~self.covered])
        # red object, shaded but never brighter than its albedo
        self.assertTrue(np.all(frame[self.covered][:, 0] > frame[self.covered][:, 1]))
        self.assertTrue(np.all(frame[self.covered][:, 0] <= 230))

    def test_noise_is_seeded(self):
        options = SyntheticOptions(noise_sigma=10.0, seed=3)
        a = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40), options)
        b = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40), options)
        c = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40),
                                   SyntheticOptions(noise_sigma=10.0, seed=4))
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_noise_has_the_folded_gaussian_mean(self):
        grey = np.full((128, 160, 3), 128, dtype=np.uint8)
        frame = render_synthetic_frame(self.mesh, self.K, self.T, grey, (230, 60, 40),
                                       SyntheticOptions(noise_sigma=15.0, seed=5))
        diff = np.abs(frame[~self.covered].astype(np.float64) - 128.0)
        # sigma * sqrt(2 / pi)
        self.assertAlmostEqual(diff.mean(), 11.97, delta=0.05 * 11.97)

    def test_light_gain_scales_everything(self):
        dim = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40),
                                     SyntheticOptions(light_gain=0.5))
        np.testing.assert_array_equal(dim[0, 0], (10, 60, 20))

    def test_occluder_is_painted_last(self):
        options = SyntheticOptions(occluder=(70, 50, 20, 20), occluder_color=(1, 2, 3))
        frame = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (230, 60, 40), options)
        self.assertTrue(np.all(frame[50:70, 70:90] == (1, 2, 3)))

    def test_facet_jitter_changes_only_the_object(self):
        plain = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (200, 60, 40))
        jittered = render_synthetic_frame(self.mesh, self.K, self.T, self.background, (200, 60, 40),
                                          SyntheticOptions(facet_jitter=0.15))
        np.testing.assert_array_equal(plain[~self.covered], jittered[~self.covered])
        self.assertFalse(np.array_equal(plain[self.covered], jittered[self.covered]))


if __name__ == '__main__':
    unittest.main()
