"""Contour correspondences from fan-shaped line search, and their weights.

Each projected contour point is matched against a small fan of search lines
around its normal; the spread of the matches along the normal gives a shape
uncertainty and the ambiguity of the central line a noise uncertainty.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from ..core.config import FanSearchParams
from ..core.errors import InvalidCorrespondence, NonPositiveWeight
from .color_segmentation import ProbMap

logger = logging.getLogger(__name__)

DIRECTION_STEP_DEG = 10.0
DIRECTION_COUNT = 36

# unit directions every 10 degrees, cosines cached with them
_TABLE_ANGLES = np.deg2rad(np.arange(DIRECTION_COUNT) * DIRECTION_STEP_DEG)
DIRECTION_TABLE = np.stack([np.cos(_TABLE_ANGLES), np.sin(_TABLE_ANGLES)], axis=1)


def snap_direction(n: np.ndarray) -> int:
    """Index of the table direction closest to ``n``."""
    angle = math.degrees(math.atan2(n[1], n[0]))
    return int(round(angle / DIRECTION_STEP_DEG)) % DIRECTION_COUNT


def fan_directions(n: np.ndarray, params: FanSearchParams) -> np.ndarray:
    """The ``n_sam`` table directions of the fan, central one in the middle.

    ``n`` may hold many normals (N, 2); the result is then (N, n_sam, 2).
    """
    n = np.asarray(n, dtype=np.float64)
    angles = np.degrees(np.arctan2(n[..., 1], n[..., 0]))
    center = np.rint(angles / DIRECTION_STEP_DEG).astype(np.int64)
    step = int(round(params.a_int / DIRECTION_STEP_DEG))
    half = (params.n_sam - 1) // 2
    idx = (center[..., None] + step * np.arange(-half, half + 1)) % DIRECTION_COUNT
    return DIRECTION_TABLE[idx]


@dataclass(frozen=True, eq=False)
class ContourCorrespondence:
    x_cnt: np.ndarray
    n: np.ndarray
    mu: float
    sigma_shp: float
    sigma_noi: float
    X_model: np.ndarray
    valid: bool

    @property
    def variance(self) -> float:
        return (self.sigma_shp * self.sigma_noi) ** 2


@dataclass(frozen=True, eq=False)
class ContourSet:
    """Column-wise storage of many correspondences for the optimizer."""

    x_cnt: np.ndarray  # (N, 2)
    n: np.ndarray  # (N, 2)
    mu: np.ndarray
    sigma_shp: np.ndarray
    sigma_noi: np.ndarray
    X_model: np.ndarray  # (N, 3)
    valid: np.ndarray

    def __len__(self) -> int:
        return int(self.mu.shape[0])

    def __getitem__(self, i: int) -> ContourCorrespondence:
        return ContourCorrespondence(
            self.x_cnt[i], self.n[i], float(self.mu[i]), float(self.sigma_shp[i]),
            float(self.sigma_noi[i]), self.X_model[i], bool(self.valid[i]),
        )

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))

    @property
    def variance(self) -> np.ndarray:
        return (self.sigma_shp * self.sigma_noi) ** 2

    def only_valid(self) -> "ContourSet":
        v = self.valid
        return ContourSet(
            self.x_cnt[v], self.n[v], self.mu[v], self.sigma_shp[v],
            self.sigma_noi[v], self.X_model[v], self.valid[v],
        )

    @classmethod
    def empty(cls) -> "ContourSet":
        return cls(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), np.ones(0), np.ones(0),
                   np.zeros((0, 3)), np.zeros(0, dtype=bool))

    @classmethod
    def from_correspondences(cls, items: List[ContourCorrespondence]) -> "ContourSet":
        if not items:
            return cls.empty()
        return cls(
            np.array([c.x_cnt for c in items], dtype=np.float64).reshape(-1, 2),
            np.array([c.n for c in items], dtype=np.float64).reshape(-1, 2),
            np.array([c.mu for c in items], dtype=np.float64),
            np.array([c.sigma_shp for c in items], dtype=np.float64),
            np.array([c.sigma_noi for c in items], dtype=np.float64),
            np.array([c.X_model for c in items], dtype=np.float64).reshape(-1, 3),
            np.array([c.valid for c in items], dtype=bool),
        )


class LineCandidates(NamedTuple):
    best: Optional[Tuple[np.ndarray, float]]
    all_gradients: List[float]


def _line_offsets(l_src: int) -> np.ndarray:
    half = (l_src - 1) // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def _local_maxima(g: np.ndarray, threshold: float) -> np.ndarray:
    """Candidate mask over the last axis: positive interior local maxima of ``g``.

    A plateau counts once (``>=`` on the left, ``>`` on the right). Samples set
    to ``-inf`` are outside the ROI; line ends and their neighbours are never
    candidates.
    """
    mask = np.zeros(g.shape, dtype=bool)
    if g.shape[-1] < 3:
        return mask
    left, mid, right = g[..., :-2], g[..., 1:-1], g[..., 2:]
    mask[..., 1:-1] = (
        (mid > threshold) & (mid >= left) & (mid > right) & np.isfinite(left) & np.isfinite(right)
    )
    return mask


def _peak_offsets(g: np.ndarray, best: np.ndarray) -> np.ndarray:
    """Sub-sample position of the candidate ``best`` relative to its sample.

    A plateau resolves to its midpoint, a single peak to the vertex of the
    parabola through it and its two neighbours.
    """
    size = g.shape[-1]
    if size < 3:
        return np.zeros(np.shape(best))
    idx = np.clip(np.asarray(best), 1, size - 2)[..., None]
    gl = np.take_along_axis(g, idx - 1, axis=-1)[..., 0]
    gc = np.take_along_axis(g, idx, axis=-1)[..., 0]
    gr = np.take_along_axis(g, idx + 1, axis=-1)[..., 0]

    same = np.zeros(g.shape, dtype=bool)
    same[..., 1:] = g[..., 1:] == g[..., :-1]
    run_start = np.maximum.accumulate(np.where(same, 0, np.arange(size)), axis=-1)
    run = idx[..., 0] - np.take_along_axis(run_start, idx, axis=-1)[..., 0]

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        curvature = gl - 2.0 * gc + gr
        vertex = 0.5 * (gl - gr) / np.where(curvature < 0, curvature, -1.0)
    vertex = np.where(np.isfinite(vertex) & (curvature < 0), np.clip(vertex, -0.5, 0.5), 0.0)
    return np.where(run > 0, -0.5 * run, vertex)


def _sample_lines(pm: ProbMap, centers: np.ndarray, dirs: np.ndarray, l_src: int) -> Tuple[np.ndarray, np.ndarray]:
    """Directional gradients along lines; returns (points (..., L, 2), gradients (..., L))."""
    t = _line_offsets(l_src)
    points = centers[..., None, :] + t[:, None] * dirs[..., None, :]
    flat = points.reshape(-1, 2)
    grad = pm.sample_gradient(flat).reshape(points.shape)
    g = np.sum(grad * dirs[..., None, :], axis=-1)
    inside = pm.inside(flat).reshape(points.shape[:-1])
    return points, np.where(inside, g, -np.inf)


def line_candidates(pm: ProbMap, center: np.ndarray, direction: np.ndarray, l_src: int,
                    threshold: float = 0.0) -> LineCandidates:
    center = np.asarray(center, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    points, g = _sample_lines(pm, center, direction, l_src)
    is_candidate = _local_maxima(g, threshold)
    if not is_candidate.any():
        return LineCandidates(None, [])
    gradients = g[is_candidate]
    best = int(np.argmax(np.where(is_candidate, g, -np.inf)))
    point = points[best] + float(_peak_offsets(g, np.array(best))) * direction
    return LineCandidates((point, float(g[best])), [float(v) for v in gradients])


def search_contours(
    pm: ProbMap,
    x_cnt: np.ndarray,
    normals: np.ndarray,
    X_model: np.ndarray,
    params: FanSearchParams,
    variance_cutoff: float = 600.0,
) -> ContourSet:
    """Fan-shaped correspondence search for many contour points at once."""
    x_cnt = np.atleast_2d(np.asarray(x_cnt, dtype=np.float64))
    normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
    count = x_cnt.shape[0]
    if count == 0:
        return ContourSet.empty()

    dirs = fan_directions(normals, params)  # (N, S, 2)
    centers = np.broadcast_to(x_cnt[:, None, :], dirs.shape)
    points, g = _sample_lines(pm, centers, dirs, params.l_src)  # (N, S, L, 2), (N, S, L)
    is_candidate = _local_maxima(g, params.candidate_threshold)

    masked = np.where(is_candidate, g, -np.inf)
    best = np.argmax(masked, axis=-1)  # (N, S)
    found = is_candidate.any(axis=-1)
    best_points = np.take_along_axis(points, best[..., None, None], axis=2)[:, :, 0, :]
    best_points = best_points + _peak_offsets(g, best)[..., None] * dirs

    # positions along the normal axis, same 1D coordinate as n^T x_cnt
    s = np.einsum("nsk,nk->ns", best_points, normals)
    n_found = found.sum(axis=1)
    safe = np.maximum(n_found, 1)
    mu = np.where(found, s, 0.0).sum(axis=1) / safe
    var = np.where(found, (s - mu[:, None]) ** 2, 0.0).sum(axis=1) / safe
    sigma_shp = np.maximum(np.sqrt(var), 1.0)

    central = (params.n_sam - 1) // 2
    central_candidates = is_candidate[:, central, :]
    central_g = np.where(central_candidates, g[:, central, :], 0.0)
    g_max = central_g.max(axis=1)
    has_central = central_candidates.any(axis=1)
    sigma_noi = np.where(has_central, central_g.sum(axis=1) / np.where(has_central, g_max, 1.0), 1.0)

    in_roi = pm.inside(x_cnt)
    valid = in_roi & has_central & ((sigma_shp * sigma_noi) ** 2 <= variance_cutoff)
    mu = np.where(n_found > 0, mu, np.einsum("nk,nk->n", x_cnt, normals))

    return ContourSet(x_cnt, normals, mu, sigma_shp, sigma_noi,
                      np.atleast_2d(np.asarray(X_model, dtype=np.float64)).reshape(count, 3), valid)


def fan_correspondence(
    pm: ProbMap,
    x_cnt: np.ndarray,
    n: np.ndarray,
    params: FanSearchParams,
    X_model: Optional[np.ndarray] = None,
    variance_cutoff: float = 600.0,
) -> ContourCorrespondence:
    X = np.zeros(3) if X_model is None else np.asarray(X_model, dtype=np.float64)
    return search_contours(pm, x_cnt, n, X, params, variance_cutoff)[0]


def contour_residual(corr: ContourCorrespondence) -> float:
    if not corr.valid:
        raise InvalidCorrespondence("residual of an invalid contour correspondence")
    return float(np.dot(corr.n, corr.x_cnt) - corr.mu)


def fit_mixture_params(a1: float, a2: float) -> Tuple[float, float, float]:
    """Coefficients of ``b1 exp(-b2 r^2 / sigma^2) + b3`` matching the log mixture
    at ``r = 0``, ``r = sigma`` and ``r -> inf``."""
    if a1 <= 0 or a2 <= 0:
        raise NonPositiveWeight(f"mixture weights must be positive, got a1={a1}, a2={a2}")
    ratio = a1 / a2
    b1 = math.log1p(ratio)
    b2 = -math.log(math.log1p(ratio * math.exp(-0.5)) / b1)
    b3 = math.log(a2)
    return b1, b2, b3


def mixture_log_likelihood(r, sigma: float, a1: float, a2: float):
    r = np.asarray(r, dtype=np.float64)
    return np.log(a1 * np.exp(-(r**2) / (2.0 * sigma**2)) + a2)


def mixture_log_approx(r, sigma: float, b1: float, b2: float, b3: float):
    r = np.asarray(r, dtype=np.float64)
    return b1 * np.exp(-b2 * r**2 / sigma**2) + b3


def contour_weight(r, sigma_i, beta: float):
    """``exp(-beta r^2) / sigma_i^2``; works elementwise on arrays."""
    w = np.exp(-beta * np.square(r)) / np.square(sigma_i)
    return float(w) if np.ndim(w) == 0 else w


def gaussian_weight(sigma_i):
    """Inverse-variance weight of a pure Gaussian residual model."""
    w = 1.0 / np.square(sigma_i)
    return float(w) if np.ndim(w) == 0 else w


def project_normals(R_CM: np.ndarray, N_model: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """Image-plane unit normals from model-frame normals via the projection Jacobian."""
    n_cam = N_model @ R_CM.T
    n2 = np.einsum("nij,nj->ni", jac, n_cam)
    norm = np.linalg.norm(n2, axis=1, keepdims=True)
    return n2 / np.where(norm > 0, norm, 1.0)
