"""CPU triangle rasterisation: depth maps, silhouettes and synthetic frames.

Depth rendering uses edge functions with a top-left fill rule and a z-buffer
with strict ``<`` comparison; triangles are submitted in index order so the
lower index wins exact ties.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import cv2
import numpy as np

from ..core.errors import DegenerateMesh
from ..core.geometry import CameraIntrinsics, Pose, project_camera_points
from ..core.mesh import TriangleMesh

logger = logging.getLogger(__name__)

INVALID_DEPTH = 0.0

# fixed light for flat shading: from the camera, slightly above
LIGHT_DIR = np.array([0.3, -0.5, -1.0]) / np.linalg.norm([0.3, -0.5, -1.0])
AMBIENT = 0.35
FACET_SEED = 7


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth along the optical axis; ``INVALID_DEPTH`` marks background."""

    depth: np.ndarray
    triangle_index: np.ndarray

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])

    @property
    def valid(self) -> np.ndarray:
        return self.depth > INVALID_DEPTH


@dataclass(frozen=True, eq=False)
class Mask:
    data: np.ndarray

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    def count(self) -> int:
        return int(np.count_nonzero(self.data))


@dataclass(frozen=True)
class SyntheticOptions:
    noise_sigma: float = 0.0
    light_gain: float = 1.0
    occluder: Optional[Tuple[int, int, int, int]] = None  # x, y, width, height
    occluder_color: Tuple[int, int, int] = (90, 90, 90)
    facet_jitter: float = 0.0  # relative per-triangle albedo variation
    seed: int = 0


def _owns_edge(dx: float, dy: float) -> bool:
    # top-left rule for positively oriented triangles in (column, row) space
    return dy < 0 or (dy == 0 and dx > 0)


def rasterize_depth(
    mesh: TriangleMesh, K: CameraIntrinsics, T: Pose, width: int, height: int
) -> DepthMap:
    """Z-buffered perspective rasterisation of every triangle (both facings)."""
    if width <= 0 or height <= 0:
        raise ValueError("image size must be positive")

    X_C = T.transform(mesh.vertices)
    px, in_front = project_camera_points(K, X_C)
    inv_z = np.where(in_front, 1.0 / np.where(in_front, X_C[:, 2], 1.0), 0.0)

    zbuf = np.full((height, width), np.inf)
    tri_buf = np.full((height, width), -1, dtype=np.int64)
    drawable = 0

    for t_index, (a, b, c) in enumerate(mesh.triangles):
        # triangles crossing the near plane are skipped rather than clipped
        if not (in_front[a] and in_front[b] and in_front[c]):
            continue
        drawable += 1
        p0, p1, p2 = px[a], px[b], px[c]
        w0_, w1_, w2_ = inv_z[a], inv_z[b], inv_z[c]
        area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
        if area == 0:
            continue
        if area < 0:
            p1, p2 = p2, p1
            w1_, w2_ = w2_, w1_
            area = -area

        x_min = max(int(np.ceil(min(p0[0], p1[0], p2[0]))), 0)
        x_max = min(int(np.floor(max(p0[0], p1[0], p2[0]))), width - 1)
        y_min = max(int(np.ceil(min(p0[1], p1[1], p2[1]))), 0)
        y_max = min(int(np.floor(max(p0[1], p1[1], p2[1]))), height - 1)
        if x_min > x_max or y_min > y_max:
            continue

        xs = np.arange(x_min, x_max + 1, dtype=np.float64)[None, :]
        ys = np.arange(y_min, y_max + 1, dtype=np.float64)[:, None]

        inside = np.ones((ys.shape[0], xs.shape[1]), dtype=bool)
        weights = []
        for (ea, eb) in ((p1, p2), (p2, p0), (p0, p1)):
            dx, dy = eb[0] - ea[0], eb[1] - ea[1]
            e = dx * (ys - ea[1]) - dy * (xs - ea[0])
            inside &= (e > 0) | ((e == 0) & _owns_edge(dx, dy))
            weights.append(e)
        if not inside.any():
            continue

        # barycentrics of p0, p1, p2 are the edge functions opposite each vertex
        l0, l1, l2 = weights[0] / area, weights[1] / area, weights[2] / area
        depth = 1.0 / (l0 * w0_ + l1 * w1_ + l2 * w2_)

        sub_z = zbuf[y_min:y_max + 1, x_min:x_max + 1]
        sub_t = tri_buf[y_min:y_max + 1, x_min:x_max + 1]
        closer = inside & (depth < sub_z)
        sub_z[closer] = depth[closer]
        sub_t[closer] = t_index

    if drawable == 0:
        raise DegenerateMesh("no triangle lies in front of the camera")

    depth_out = np.where(np.isfinite(zbuf), zbuf, INVALID_DEPTH)
    return DepthMap(depth_out, tri_buf)


def mask_from_depth(d: DepthMap) -> Mask:
    return Mask(d.depth > INVALID_DEPTH)


def silhouette_mask(
    mesh: TriangleMesh, K: CameraIntrinsics, T: Pose, width: int, height: int
) -> np.ndarray:
    """Union of the projected triangles as a boolean image (no depth test)."""
    X_C = T.transform(mesh.vertices)
    px, in_front = project_camera_points(K, X_C)
    tris = mesh.triangles[np.all(in_front[mesh.triangles], axis=1)]
    mask = np.zeros((height, width), dtype=np.uint8)
    if tris.shape[0] == 0:
        return mask.astype(bool)
    shift = 4
    pts = np.round(px[tris] * (1 << shift)).astype(np.int32)
    # keep coordinates inside int32 range for wild projections
    pts = np.clip(pts, -(1 << 28), 1 << 28)
    cv2.fillPoly(mask, list(pts), 1, lineType=cv2.LINE_8, shift=shift)
    return mask.astype(bool)


def _face_normals_camera(mesh: TriangleMesh, T: Pose) -> np.ndarray:
    X_C = T.transform(mesh.vertices)
    tri = X_C[mesh.triangles]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(norm > 0, norm, 1.0)


def render_synthetic_frame(
    mesh: TriangleMesh,
    K: CameraIntrinsics,
    T: Pose,
    background: np.ndarray,
    albedo: Sequence[float],
    options: Optional[SyntheticOptions] = None,
) -> np.ndarray:
    """Flat-shaded object over ``background`` with optional noise, gain and occluder."""
    options = options or SyntheticOptions()
    height, width = background.shape[:2]
    image = background.astype(np.float64).copy()

    try:
        depth = rasterize_depth(mesh, K, T, width, height)
    except DegenerateMesh:
        depth = None

    if depth is not None:
        covered = depth.valid
        if covered.any():
            normals = _face_normals_camera(mesh, T)
            # both facings are lit, the z-buffer already picked the visible one
            shade = AMBIENT + (1.0 - AMBIENT) * np.abs(normals @ LIGHT_DIR)
            if options.facet_jitter > 0:
                # fixed per-triangle pattern, independent of the frame seed
                pattern = np.random.default_rng(FACET_SEED).uniform(-1.0, 1.0, size=shade.shape[0])
                shade = shade * (1.0 + options.facet_jitter * pattern)
            tri = depth.triangle_index[covered]
            image[covered] = shade[tri][:, None] * np.asarray(albedo, dtype=np.float64)[None, :]

    image *= options.light_gain

    if options.occluder is not None:
        ox, oy, ow, oh = options.occluder
        x0, y0 = max(ox, 0), max(oy, 0)
        x1, y1 = min(ox + ow, width), min(oy + oh, height)
        if x0 < x1 and y0 < y1:
            image[y0:y1, x0:x1] = np.asarray(options.occluder_color, dtype=np.float64)

    if options.noise_sigma > 0:
        rng = np.random.default_rng(options.seed)
        image += rng.normal(0.0, options.noise_sigma, size=image.shape)

    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
