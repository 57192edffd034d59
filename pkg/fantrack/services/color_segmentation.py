"""Global foreground/background color histograms and the background probability map."""
import dataclasses
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import cv2
import numpy as np

from ..core.errors import EmptyRegion, OutOfRoi
from ..core.models import Rect

logger = logging.getLogger(__name__)

EPSILON = 1e-6
SOBEL_SCALE = 1.0 / 8.0
REMAP_COLUMNS = 1024


@dataclass(frozen=True, eq=False)
class ColorModel:
    """Normalized RGB histograms with ``bins`` cells per channel."""

    hist_f: np.ndarray  # (B, B, B)
    hist_b: np.ndarray
    learn_rate_f: float = 0.1
    learn_rate_b: float = 0.2

    @property
    def bins(self) -> int:
        return int(self.hist_f.shape[0])

    @classmethod
    def uniform(cls, bins: int = 32, learn_rate_f: float = 0.1, learn_rate_b: float = 0.2) -> "ColorModel":
        h = np.full((bins, bins, bins), 1.0 / bins**3)
        return cls(h, h.copy(), learn_rate_f, learn_rate_b)

    def lookup(self, image: np.ndarray):
        """Per-pixel ``(p_f, p_b)`` for an RGB image."""
        idx = (image.astype(np.int64) * self.bins) // 256
        r, g, b = idx[..., 0], idx[..., 1], idx[..., 2]
        return self.hist_f[r, g, b], self.hist_b[r, g, b]


@dataclass(frozen=True, eq=False)
class ProbMap:
    """Background probability ``P_b`` over a ROI with its Sobel gradients."""

    roi: Rect
    values: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray

    @cached_property
    def _gradients(self) -> np.ndarray:
        return np.dstack([self.grad_x, self.grad_y]).astype(np.float32)

    def sample_gradient(self, points: np.ndarray) -> np.ndarray:
        """Bilinear ``(grad_x, grad_y)`` at image positions (N, 2); edge values outside the ROI.

        Sub-pixel positions resolve to 1/32 pixel.
        """
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        count = p.shape[0]
        if count == 0:
            return np.zeros((0, 2))
        # remap wants both map sides below 2^15
        rows = -(-count // REMAP_COLUMNS)
        maps = np.zeros((2, rows * REMAP_COLUMNS), dtype=np.float32)
        maps[0, :count] = p[:, 0] - self.roi.x
        maps[1, :count] = p[:, 1] - self.roi.y
        out = cv2.remap(self._gradients, maps[0].reshape(rows, REMAP_COLUMNS), maps[1].reshape(rows, REMAP_COLUMNS),
                        cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)
        return out.reshape(-1, 2)[:count].astype(np.float64)

    def inside(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return (
            (p[:, 0] >= self.roi.x) & (p[:, 0] <= self.roi.x1 - 1)
            & (p[:, 1] >= self.roi.y) & (p[:, 1] <= self.roi.y1 - 1)
        )


def _histogram(image: np.ndarray, mask: np.ndarray, bins: int) -> np.ndarray:
    hist = cv2.calcHist([image], [0, 1, 2], mask.astype(np.uint8), [bins] * 3, [0, 256] * 3)
    return hist.astype(np.float64)


def update_color_model(
    model: ColorModel,
    image: np.ndarray,
    silhouette_mask: np.ndarray,
    roi: Rect,
    learn_rate_f: Optional[float] = None,
    learn_rate_b: Optional[float] = None,
    margin: int = 0,
) -> ColorModel:
    """Blend instantaneous region histograms into the model.

    Foreground is the silhouette inside the ROI, background the rest of the ROI.
    Pixels within ``margin`` of the silhouette outline belong to neither region.
    """
    alpha_f = model.learn_rate_f if learn_rate_f is None else learn_rate_f
    alpha_b = model.learn_rate_b if learn_rate_b is None else learn_rate_b

    in_roi = np.zeros(silhouette_mask.shape, dtype=bool)
    in_roi[roi.slices] = True
    inner = outer = silhouette_mask.astype(np.uint8)
    if margin > 0:
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * margin + 1, 2 * margin + 1))
        inner = cv2.erode(inner, kernel, borderType=cv2.BORDER_REPLICATE)
        outer = cv2.dilate(outer, kernel, borderType=cv2.BORDER_REPLICATE)
    fg = in_roi & inner.astype(bool)
    bg = in_roi & ~outer.astype(bool)
    n_f, n_b = int(np.count_nonzero(fg)), int(np.count_nonzero(bg))
    if n_f == 0 or n_b == 0:
        raise EmptyRegion(f"empty color region (foreground {n_f}, background {n_b} pixels)", model=model)

    crop = np.ascontiguousarray(image[roi.slices])
    inst_f = _histogram(crop, fg[roi.slices], model.bins) / n_f
    inst_b = _histogram(crop, bg[roi.slices], model.bins) / n_b

    hist_f = (1.0 - alpha_f) * model.hist_f + alpha_f * inst_f
    hist_b = (1.0 - alpha_b) * model.hist_b + alpha_b * inst_b
    return dataclasses.replace(model, hist_f=hist_f / hist_f.sum(), hist_b=hist_b / hist_b.sum())


def probability_map(image: np.ndarray, roi: Rect, model: ColorModel) -> ProbMap:
    if roi.is_empty:
        raise ValueError("probability map needs a non-empty ROI")
    p_f, p_b = model.lookup(image[roi.slices])
    p_f = np.maximum(p_f, EPSILON)
    p_b = np.maximum(p_b, EPSILON)
    values = p_b / (p_f + p_b)
    grad_x = cv2.Sobel(values, cv2.CV_64F, 1, 0, ksize=3, scale=SOBEL_SCALE, borderType=cv2.BORDER_REPLICATE)
    grad_y = cv2.Sobel(values, cv2.CV_64F, 0, 1, ksize=3, scale=SOBEL_SCALE, borderType=cv2.BORDER_REPLICATE)
    return ProbMap(roi, values, grad_x, grad_y)


def direction_gradient(pm: ProbMap, p: np.ndarray, direction: np.ndarray) -> float:
    """Directional derivative of ``P_b`` at ``p`` (bilinear) along ``direction``."""
    p = np.asarray(p, dtype=np.float64)
    if not pm.roi.contains(p[0], p[1]):
        raise OutOfRoi(f"position {p.tolist()} outside ROI {pm.roi}")
    grad = pm.sample_gradient(p)[0]
    return float(np.dot(np.asarray(direction, dtype=np.float64), grad))
