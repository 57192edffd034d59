"""Tests for the color histograms and the background probability map."""
import unittest

import numpy as np

from fantrack.core.errors import EmptyRegion, OutOfRoi
from fantrack.core.models import Rect
from fantrack.services.color_segmentation import (
    EPSILON,
    ColorModel,
    ProbMap,
    direction_gradient,
    probability_map,
    update_color_model,
)

RED = (220, 40, 30)
BLUE = (20, 90, 200)


def two_tone(width: int = 40, height: int = 40, split: int = 20):
    """Red left part (the object) and blue right part."""
    image = np.zeros((height, width, 3), dtype=np.uint8)
    image[:, :split] = RED
    image[:, split:] = BLUE
    silhouette = np.zeros((height, width), dtype=bool)
    silhouette[:, :split] = True
    return image, silhouette


class TestColorModel(unittest.TestCase):

    def test_uniform(self):
        model = ColorModel.uniform(32)
        self.assertEqual(model.bins, 32)
        self.assertAlmostEqual(model.hist_f.sum(), 1.0)
        self.assertAlmostEqual(model.hist_b.sum(), 1.0)

    def test_bin_lookup(self):
        model = ColorModel.uniform(32)
        hist_f = np.zeros((32, 32, 32))
        hist_f[31, 1, 0] = 1.0
        model = ColorModel(hist_f, model.hist_b)
        p_f, _ = model.lookup(np.array([[[255, 8, 7]]], dtype=np.uint8))
        self.assertEqual(p_f[0, 0], 1.0)
        p_f, _ = model.lookup(np.array([[[255, 7, 7]]], dtype=np.uint8))
        self.assertEqual(p_f[0, 0], 0.0)


class TestUpdate(unittest.TestCase):

    def setUp(self):
        self.image, self.silhouette = two_tone()
        self.roi = Rect(0, 0, 40, 40)
        self.uniform = ColorModel.uniform(32)

    def test_full_rate_gives_region_histograms(self):
        model = update_color_model(self.uniform, self.image, self.silhouette, self.roi, 1.0, 1.0)
        p_f, p_b = model.lookup(np.array([[RED, BLUE]], dtype=np.uint8))
        np.testing.assert_allclose(p_f[0], [1.0, 0.0])
        np.testing.assert_allclose(p_b[0], [0.0, 1.0])

    def test_blending_with_model_rates(self):
        model = update_color_model(self.uniform, self.image, self.silhouette, self.roi)
        p_f, p_b = model.lookup(np.array([[RED]], dtype=np.uint8))
        u = 1.0 / 32**3
        self.assertAlmostEqual(p_f[0, 0], 0.9 * u + 0.1)
        self.assertAlmostEqual(p_b[0, 0], 0.8 * u)

    def test_histograms_stay_normalized(self):
        model = self.uniform
        rng = np.random.default_rng(0)
        for _ in range(5):
            noisy = np.clip(self.image + rng.normal(0, 20, self.image.shape), 0, 255).astype(np.uint8)
            model = update_color_model(model, noisy, self.silhouette, self.roi)
            self.assertAlmostEqual(model.hist_f.sum(), 1.0)
            self.assertAlmostEqual(model.hist_b.sum(), 1.0)
            self.assertTrue(np.all(model.hist_f >= 0))

    def test_only_the_roi_counts(self):
        image = self.image.copy()
        image[:, 30:] = (0, 255, 0)
        model = update_color_model(self.uniform, image, self.silhouette, Rect(0, 0, 30, 40), 1.0, 1.0)
        _, p_b = model.lookup(np.array([[(0, 255, 0)]], dtype=np.uint8))
        self.assertEqual(p_b[0, 0], 0.0)

    def test_margin_keeps_a_misaligned_outline_out(self):
        # silhouette two pixels wider than the red object
        wide = np.zeros_like(self.silhouette)
        wide[:, :22] = True
        leaky = update_color_model(self.uniform, self.image, wide, self.roi, 1.0, 1.0)
        p_f, _ = leaky.lookup(np.array([[BLUE]], dtype=np.uint8))
        self.assertGreater(p_f[0, 0], 0.0)

        model = update_color_model(self.uniform, self.image, wide, self.roi, 1.0, 1.0, margin=3)
        p_f, p_b = model.lookup(np.array([[RED, BLUE]], dtype=np.uint8))
        np.testing.assert_allclose(p_f[0], [1.0, 0.0])
        np.testing.assert_allclose(p_b[0], [0.0, 1.0])

    def test_margin_can_empty_a_thin_silhouette(self):
        thin = np.zeros_like(self.silhouette)
        thin[:, 18:22] = True
        with self.assertRaises(EmptyRegion):
            update_color_model(self.uniform, self.image, thin, self.roi, margin=3)

    def test_empty_background(self):
        with self.assertRaises(EmptyRegion) as ctx:
            update_color_model(self.uniform, self.image, self.silhouette, Rect(0, 0, 20, 40))
        self.assertIs(ctx.exception.model, self.uniform)

    def test_empty_foreground(self):
        with self.assertRaises(EmptyRegion):
            update_color_model(self.uniform, self.image, self.silhouette, Rect(25, 0, 15, 40))


class TestProbabilityMap(unittest.TestCase):

    def setUp(self):
        image, silhouette = two_tone()
        self.image = image
        self.roi = Rect(0, 0, 40, 40)
        self.model = update_color_model(ColorModel.uniform(32), image, silhouette, self.roi, 1.0, 1.0)
        self.pm = probability_map(image, self.roi, self.model)

    def test_values(self):
        np.testing.assert_allclose(self.pm.values[:, :20], EPSILON / (1 + EPSILON))
        np.testing.assert_allclose(self.pm.values[:, 20:], 1 / (1 + EPSILON))
        self.assertTrue(np.all((self.pm.values > 0) & (self.pm.values < 1)))

    def test_step_gradient(self):
        # Sobel with 1/8 scale: a unit step gives 0.5 on both sides of the edge
        for col in (19, 20):
            self.assertAlmostEqual(self.pm.grad_x[20, col], 0.5, places=5)
        self.assertAlmostEqual(self.pm.grad_x[20, 10], 0.0)
        np.testing.assert_allclose(self.pm.grad_y, 0.0, atol=1e-12)

    def test_direction_gradient(self):
        self.assertAlmostEqual(direction_gradient(self.pm, [19.5, 12.0], [1.0, 0.0]), 0.5, places=5)
        self.assertAlmostEqual(direction_gradient(self.pm, [19.5, 12.0], [-1.0, 0.0]), -0.5, places=5)
        self.assertAlmostEqual(direction_gradient(self.pm, [19.5, 12.0], [0.0, 1.0]), 0.0, places=9)

    def test_sample_gradient_on_a_ramp(self):
        h, w = 20, 30
        grad_x = np.tile(np.arange(w, dtype=float), (h, 1))
        grad_y = np.tile(np.arange(h, dtype=float)[:, None], (1, w))
        pm = ProbMap(Rect(5, 5, w, h), np.zeros((h, w)), grad_x, grad_y)
        rng = np.random.default_rng(4)
        # more samples than one remap side holds
        points = np.column_stack([rng.uniform(5.0, 34.0, 50000), rng.uniform(5.0, 24.0, 50000)])
        grads = pm.sample_gradient(points)
        np.testing.assert_allclose(grads, points - 5.0, atol=1.0 / 32.0)
        np.testing.assert_allclose(pm.sample_gradient([[100.0, -3.0]]), [[29.0, 0.0]])
        self.assertEqual(pm.sample_gradient(np.zeros((0, 2))).shape, (0, 2))

    def test_swapped_histograms_complement_the_map(self):
        swapped = ColorModel(self.model.hist_b, self.model.hist_f)
        pm = probability_map(self.image, self.roi, swapped)
        np.testing.assert_allclose(pm.values, 1.0 - self.pm.values, atol=1e-12)
        np.testing.assert_allclose(pm.grad_x, -self.pm.grad_x, atol=1e-12)

    def test_offset_roi(self):
        roi = Rect(10, 5, 20, 30)
        pm = probability_map(self.image, roi, self.model)
        self.assertEqual(pm.values.shape, (30, 20))
        self.assertAlmostEqual(direction_gradient(pm, [19.5, 12.0], [1.0, 0.0]), 0.5, places=5)

    def test_outside_roi(self):
        with self.assertRaises(OutOfRoi):
            direction_gradient(self.pm, [40.0, 3.0], [1.0, 0.0])
        with self.assertRaises(OutOfRoi):
            direction_gradient(self.pm, [-0.5, 3.0], [1.0, 0.0])

    def test_empty_roi(self):
        with self.assertRaises(ValueError):
            probability_map(self.image, Rect(0, 0, 0, 10), self.model)


if __name__ == '__main__':
    unittest.main()
