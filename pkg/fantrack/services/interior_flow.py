"""Interior modality: ROI optical flow, sparse interior matches and their confidence."""
import logging
import math
from dataclasses import dataclass
from typing import List

import cv2
import numpy as np
from scipy import ndimage

from ..core.config import FlowParams
from ..core.errors import PatchOutOfBounds, RoiTooSmall
from ..core.geometry import CameraIntrinsics, Pose, project_camera_points
from ..core.models import Rect

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlowField:
    """Displacement ``u`` (H, W, 2) from the previous to the current frame over ``roi``."""

    roi: Rect
    u: np.ndarray

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Bilinear flow at image positions (N, 2)."""
        p = np.atleast_2d(points)
        coords = np.stack([p[:, 1] - self.roi.y, p[:, 0] - self.roi.x])
        ux = ndimage.map_coordinates(self.u[..., 0], coords, order=1, mode="nearest")
        uy = ndimage.map_coordinates(self.u[..., 1], coords, order=1, mode="nearest")
        return np.stack([ux, uy], axis=1)


@dataclass(frozen=True, eq=False)
class InteriorCorrespondence:
    x_in: np.ndarray
    x_in_prime: np.ndarray
    c_in: float
    X_model: np.ndarray


@dataclass(frozen=True, eq=False)
class InteriorSet:
    x_in: np.ndarray  # (N, 2)
    x_in_prime: np.ndarray  # (N, 2)
    c_in: np.ndarray
    X_model: np.ndarray  # (N, 3)

    def __len__(self) -> int:
        return int(self.c_in.shape[0])

    def __getitem__(self, i: int) -> InteriorCorrespondence:
        return InteriorCorrespondence(self.x_in[i], self.x_in_prime[i], float(self.c_in[i]), self.X_model[i])

    @classmethod
    def empty(cls) -> "InteriorSet":
        return cls(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), np.zeros((0, 3)))

    @classmethod
    def from_correspondences(cls, items: List[InteriorCorrespondence]) -> "InteriorSet":
        if not items:
            return cls.empty()
        return cls(
            np.array([c.x_in for c in items], dtype=np.float64),
            np.array([c.x_in_prime for c in items], dtype=np.float64),
            np.array([c.c_in for c in items], dtype=np.float64),
            np.array([c.X_model for c in items], dtype=np.float64),
        )


def coarsest_scale(width: int, height: int, params: FlowParams) -> int:
    """Scale exponent of the coarsest level DIS builds for a ``width`` x ``height`` ROI.

    Same rule as the OpenCV engine; negative when no patch fits at full scale.
    """
    if min(width, height) < params.patch_size:
        return -1
    by_extent = int(math.log2(max(width, height) / (4.0 * params.patch_size)) + 0.5)
    by_patches = int(math.log2(min(width, height) // params.patch_size))
    return min(by_extent, by_patches)


def _dis_engine(params: FlowParams) -> "cv2.DISOpticalFlow":
    dis = cv2.DISOpticalFlow_create(cv2.DISOPTICAL_FLOW_PRESET_ULTRAFAST)
    dis.setFinestScale(params.finest_scale)
    dis.setPatchSize(params.patch_size)
    dis.setPatchStride(params.patch_stride)
    dis.setGradientDescentIterations(params.inverse_search_iters)
    dis.setVariationalRefinementIterations(0)
    dis.setUseMeanNormalization(True)
    dis.setUseSpatialPropagation(params.spatial_propagation)
    return dis


def compute_flow(prev_gray: np.ndarray, cur_gray: np.ndarray, roi: Rect, params: FlowParams) -> FlowField:
    """Coarse-to-fine dense inverse search flow restricted to ``roi``."""
    if prev_gray.shape != cur_gray.shape:
        raise ValueError(f"image sizes differ: {prev_gray.shape} vs {cur_gray.shape}")
    height, width = prev_gray.shape[:2]
    if not Rect(0, 0, width, height).contains_rect(roi):
        raise ValueError(f"ROI {roi} exceeds the {width}x{height} image")

    coarsest = coarsest_scale(roi.width, roi.height, params)
    if coarsest < params.finest_scale:
        raise RoiTooSmall(
            f"ROI {roi.width}x{roi.height} gives no pyramid level down to 1/{2 ** params.finest_scale} "
            f"scale with {params.patch_size}px patches"
        )
    logger.debug(f"Flow pyramid for ROI {roi.width}x{roi.height}: scales 1/{2 ** coarsest} to 1/{2 ** params.finest_scale}")

    prev_crop = np.ascontiguousarray(prev_gray[roi.slices], dtype=np.uint8)
    cur_crop = np.ascontiguousarray(cur_gray[roi.slices], dtype=np.uint8)
    dis = _dis_engine(params)
    u = dis.calc(prev_crop, cur_crop, None)
    u = np.nan_to_num(u.astype(np.float64), nan=0.0, posinf=0.0, neginf=0.0)
    return FlowField(roi, u)


def _gradient_magnitude(gray: np.ndarray) -> np.ndarray:
    g = gray.astype(np.float64)
    gx = cv2.Sobel(g, cv2.CV_64F, 1, 0, ksize=3, scale=1.0 / 8.0, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(g, cv2.CV_64F, 0, 1, ksize=3, scale=1.0 / 8.0, borderType=cv2.BORDER_REPLICATE)
    return np.hypot(gx, gy)


def flow_confidences(
    prev_gray: np.ndarray,
    cur_gray: np.ndarray,
    flow: FlowField,
    x_in: np.ndarray,
    params: FlowParams,
) -> np.ndarray:
    """Confidence ``max(1 - e^2, 0)`` of the flow at each point (N, 2)."""
    s = params.confidence_patch
    half = s // 2
    roi = flow.roi
    x = np.atleast_2d(np.asarray(x_in, dtype=np.float64))
    if x.shape[0] == 0:
        return np.zeros(0)
    centers = np.rint(x).astype(np.int64)
    inside = (
        (centers[:, 0] - half >= roi.x) & (centers[:, 0] + half <= roi.x1 - 1)
        & (centers[:, 1] - half >= roi.y) & (centers[:, 1] + half <= roi.y1 - 1)
    )
    if not inside.all():
        raise PatchOutOfBounds(f"{int(np.count_nonzero(~inside))} confidence patches leave ROI {roi}")

    offsets = np.arange(-half, half + 1)
    dy, dx = np.meshgrid(offsets, offsets, indexing="ij")
    # (N, s*s) patch pixel positions, image coordinates
    px = centers[:, 0:1] + dx.reshape(1, -1)
    py = centers[:, 1:2] + dy.reshape(1, -1)
    local = np.stack([py - roi.y, px - roi.x])
    u = np.stack([flow.u[local[0], local[1], 0], flow.u[local[0], local[1], 1]], axis=-1)

    warped = np.stack([py + u[..., 1], px + u[..., 0]])
    cur = cur_gray.astype(np.float64)
    prev = prev_gray.astype(np.float64)
    area = float(s * s)

    sum_cur = ndimage.map_coordinates(cur, warped.reshape(2, -1), order=1, mode="nearest").reshape(px.shape).sum(axis=1)
    sum_prev = prev[py, px].sum(axis=1)
    e_i = np.abs(sum_cur - sum_prev) / area / params.eta_i

    # gradient magnitudes on a crop that holds every patch and its warp plus the Sobel support
    height, width = cur.shape[:2]
    pad = int(np.ceil(np.abs(u).max(initial=0.0))) + 2
    x0, y0 = int(px.min()), int(py.min())
    box = Rect(x0, y0, int(px.max()) - x0 + 1, int(py.max()) - y0 + 1).expand(pad).clip(width, height)
    mag_cur = _gradient_magnitude(cur_gray[box.slices])
    mag_prev = _gradient_magnitude(prev_gray[box.slices])
    crop_warped = warped - np.array([box.y, box.x]).reshape(2, 1, 1)
    grad_cur = ndimage.map_coordinates(mag_cur, crop_warped.reshape(2, -1), order=1, mode="nearest").reshape(px.shape).sum(axis=1)
    grad_prev = mag_prev[py - box.y, px - box.x].sum(axis=1)
    e_g = np.abs(grad_cur - grad_prev) / area / params.eta_g

    # flow smoothness from central differences over the ROI field
    dux_dy, dux_dx = np.gradient(flow.u[..., 0])
    duy_dy, duy_dx = np.gradient(flow.u[..., 1])
    smooth = dux_dx**2 + dux_dy**2 + duy_dx**2 + duy_dy**2
    e_s = smooth[local[0], local[1]].sum(axis=1) / area / params.eta_s

    e = e_i + e_g + e_s
    return np.maximum(1.0 - e**2, 0.0)


def flow_confidence(prev_gray, cur_gray, flow: FlowField, x_in, params: FlowParams = FlowParams()) -> float:
    return float(flow_confidences(prev_gray, cur_gray, flow, np.asarray(x_in, dtype=np.float64), params)[0])


def interior_correspondences(
    template_points: np.ndarray,
    T_CM: Pose,
    K: CameraIntrinsics,
    flow: FlowField,
    prev_gray: np.ndarray,
    cur_gray: np.ndarray,
    params: FlowParams = FlowParams(),
) -> InteriorSet:
    """Project interior template points with the previous pose and follow the flow."""
    X_model = np.atleast_2d(np.asarray(template_points, dtype=np.float64))
    if X_model.shape[0] == 0:
        return InteriorSet.empty()
    px, in_front = project_camera_points(K, T_CM.transform(X_model))
    margin = params.confidence_patch // 2
    roi = flow.roi
    keep = in_front.copy()
    keep[in_front] = (
        (np.rint(px[in_front, 0]) - margin >= roi.x) & (np.rint(px[in_front, 0]) + margin <= roi.x1 - 1)
        & (np.rint(px[in_front, 1]) - margin >= roi.y) & (np.rint(px[in_front, 1]) + margin <= roi.y1 - 1)
    )
    if not keep.any():
        return InteriorSet.empty()
    x_in = px[keep]
    target = x_in + flow.sample(x_in)
    c_in = flow_confidences(prev_gray, cur_gray, flow, x_in, params)
    logger.debug(f"Interior correspondences: {x_in.shape[0]}/{X_model.shape[0]}, mean confidence {c_in.mean():.3f}")
    return InteriorSet(x_in, target, c_in, X_model[keep])


def interior_weight(r, c, gamma: float):
    """``c * exp(-gamma r^2)``; elementwise on arrays."""
    w = np.asarray(c) * np.exp(-gamma * np.square(r))
    return float(w) if np.ndim(w) == 0 else w
