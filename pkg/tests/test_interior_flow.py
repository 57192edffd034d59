"""Tests for ROI optical flow, flow confidence and interior correspondences."""
import unittest

import cv2
import numpy as np

from fantrack.core.config import FlowParams
from fantrack.core.errors import PatchOutOfBounds, RoiTooSmall
from fantrack.core.geometry import CameraIntrinsics, Pose, backproject
from fantrack.core.models import Rect
from fantrack.services.interior_flow import (
    FlowField,
    InteriorCorrespondence,
    InteriorSet,
    coarsest_scale,
    compute_flow,
    flow_confidence,
    flow_confidences,
    interior_correspondences,
    interior_weight,
)


def texture(size: int = 160, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 255.0, size=(size, size)).astype(np.float32)
    smooth = cv2.GaussianBlur(noise, (0, 0), 2.0)
    return cv2.normalize(smooth, None, 30, 220, cv2.NORM_MINMAX).astype(np.uint8)


class TestComputeFlow(unittest.TestCase):

    def setUp(self):
        self.prev = texture()
        self.roi = Rect(20, 20, 120, 120)

    def test_coarsest_scale(self):
        params = FlowParams()
        self.assertEqual(coarsest_scale(120, 120, params), 2)
        self.assertEqual(coarsest_scale(640, 512, params), 4)
        self.assertEqual(coarsest_scale(40, 40, params), 0)
        self.assertLess(coarsest_scale(7, 300, params), 0)

    def test_random_shifts(self):
        rng = np.random.default_rng(11)
        errors = []
        for seed in range(20):
            prev = texture(seed=seed)
            shift = rng.uniform(-5.0, 5.0, size=2)
            if seed % 2 == 0:
                shift = np.rint(shift)
            M = np.array([[1.0, 0.0, shift[0]], [0.0, 1.0, shift[1]]])
            cur = cv2.warpAffine(prev, M, (160, 160), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REFLECT)
            flow = compute_flow(prev, cur, self.roi, FlowParams())
            centre = flow.u[30:90, 30:90].reshape(-1, 2)
            errors.append(np.median(np.linalg.norm(centre - shift, axis=1)))
        self.assertLess(np.median(errors), 0.5)

    def test_recovers_translation(self):
        cur = np.roll(self.prev, shift=(2, 3), axis=(0, 1))
        flow = compute_flow(self.prev, cur, self.roi, FlowParams())
        self.assertEqual(flow.u.shape, (120, 120, 2))
        centre = flow.u[30:90, 30:90].reshape(-1, 2)
        np.testing.assert_allclose(np.median(centre, axis=0), [3.0, 2.0], atol=0.75)

    def test_static_scene(self):
        flow = compute_flow(self.prev, self.prev.copy(), self.roi, FlowParams())
        self.assertLess(np.abs(np.median(flow.u.reshape(-1, 2), axis=0)).max(), 0.25)
        self.assertLess(np.abs(flow.u).max(), 0.05)
        self.assertTrue(np.all(np.isfinite(flow.u)))

    def test_deterministic(self):
        cur = np.roll(self.prev, shift=(1, -2), axis=(0, 1))
        a = compute_flow(self.prev, cur, self.roi, FlowParams())
        b = compute_flow(self.prev, cur, self.roi, FlowParams())
        np.testing.assert_array_equal(a.u, b.u)

    def test_roi_too_small(self):
        with self.assertRaises(RoiTooSmall):
            compute_flow(self.prev, self.prev, Rect(0, 0, 40, 40), FlowParams())

    def test_size_mismatch(self):
        with self.assertRaises(ValueError):
            compute_flow(self.prev, self.prev[:100], self.roi, FlowParams())

    def test_roi_outside_image(self):
        with self.assertRaises(ValueError):
            compute_flow(self.prev, self.prev, Rect(100, 100, 100, 100), FlowParams())


class TestFlowConfidence(unittest.TestCase):

    def setUp(self):
        self.prev = texture(seed=1)
        self.roi = Rect(0, 0, 160, 160)
        self.zero_flow = FlowField(self.roi, np.zeros((160, 160, 2)))

    def test_perfect_match(self):
        c = flow_confidence(self.prev, self.prev, self.zero_flow, [80.0, 80.0])
        self.assertAlmostEqual(c, 1.0)

    def test_brightness_change(self):
        # uniform +20 offset: e_I = 20 / 40, gradients unchanged
        cur = self.prev + np.uint8(20)
        c = flow_confidence(self.prev, cur, self.zero_flow, [80.0, 80.0])
        self.assertAlmostEqual(c, 0.75)

    def test_large_error_clamps_to_zero(self):
        base = self.prev // 2
        near, far = base + np.uint8(30), base + np.uint8(45)
        self.assertAlmostEqual(flow_confidence(base, near, self.zero_flow, [80.0, 80.0]), 1.0 - 0.75**2)
        self.assertEqual(flow_confidence(base, far, self.zero_flow, [80.0, 80.0]), 0.0)

    def test_correct_flow_is_trusted(self):
        cur = np.roll(self.prev, shift=(0, 2), axis=(0, 1))
        shifted = FlowField(self.roi, np.tile([2.0, 0.0], (160, 160, 1)))
        good = flow_confidence(self.prev, cur, shifted, [80.0, 80.0])
        bad = flow_confidence(self.prev, cur, self.zero_flow, [80.0, 80.0])
        self.assertAlmostEqual(good, 1.0)
        self.assertLess(bad, good)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(2)
        cur = texture(seed=3)
        flow = FlowField(self.roi, rng.normal(0.0, 2.0, size=(160, 160, 2)))
        c = flow_confidences(self.prev, cur, flow, rng.uniform(10, 150, size=(50, 2)), FlowParams())
        self.assertTrue(np.all((c >= 0.0) & (c <= 1.0)))

    def test_patch_out_of_bounds(self):
        with self.assertRaises(PatchOutOfBounds):
            flow_confidence(self.prev, self.prev, self.zero_flow, [0.0, 80.0])


class TestInteriorCorrespondences(unittest.TestCase):

    def setUp(self):
        self.K = CameraIntrinsics(200.0, 200.0, 80.0, 80.0)
        self.T = Pose(np.eye(3), [0.0, 0.0, 1.0])
        self.gray = texture(seed=4)
        self.flow = FlowField(Rect(10, 10, 140, 140), np.tile([2.0, -1.0], (140, 140, 1)))

    def points_at(self, pixels):
        X_C = backproject(self.K, np.asarray(pixels, dtype=float), 1.0)
        return self.T.inverse().transform(X_C)

    def test_targets_follow_the_flow(self):
        X = self.points_at([[60.0, 70.0], [100.0, 90.0]])
        interiors = interior_correspondences(X, self.T, self.K, self.flow, self.gray, self.gray)
        self.assertEqual(len(interiors), 2)
        np.testing.assert_allclose(interiors.x_in, [[60.0, 70.0], [100.0, 90.0]], atol=1e-9)
        np.testing.assert_allclose(interiors.x_in_prime, [[62.0, 69.0], [102.0, 89.0]], atol=1e-9)
        np.testing.assert_allclose(interiors.X_model, X)

    def test_points_near_the_roi_border_are_dropped(self):
        X = self.points_at([[60.0, 70.0], [10.0, 70.0], [200.0, 70.0]])
        interiors = interior_correspondences(X, self.T, self.K, self.flow, self.gray, self.gray)
        self.assertEqual(len(interiors), 1)

    def test_no_points(self):
        interiors = interior_correspondences(np.zeros((0, 3)), self.T, self.K, self.flow, self.gray, self.gray)
        self.assertEqual(len(interiors), 0)


class TestInteriorHelpers(unittest.TestCase):

    def test_weight(self):
        self.assertAlmostEqual(interior_weight(0.0, 0.5, 1.0), 0.5)
        self.assertAlmostEqual(interior_weight(2.0, 1.0, 0.5), np.exp(-2.0))
        np.testing.assert_allclose(interior_weight(np.zeros(2), np.array([0.2, 0.4]), 1.0), [0.2, 0.4])

    def test_set_from_correspondences(self):
        interiors = InteriorSet.from_correspondences([
            InteriorCorrespondence(np.zeros(2), np.array([3.0, 4.0]), 1.0, np.zeros(3)),
            InteriorCorrespondence(np.zeros(2), np.array([1.0, 1.0]), 0.5, np.zeros(3)),
        ])
        np.testing.assert_allclose(interiors.x_in_prime, [[3.0, 4.0], [1.0, 1.0]])
        self.assertEqual(interiors[1].c_in, 0.5)


if __name__ == '__main__':
    unittest.main()
