"""Joint contour/interior pose optimisation by regularised Gauss-Newton.

The pose is updated by left-multiplication, ``T <- exp(dxi) T``, so every
Jacobian is taken with respect to a twist applied in the camera frame.
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np
from scipy import linalg

from ..core.config import Stage, TrackerConfig
from ..core.errors import BehindCamera, LostTrack, RoiTooSmall, SingularSystem
from ..core.geometry import (
    CameraIntrinsics,
    Pose,
    Twist,
    compose,
    exp_se3,
    point_twist_jacobian,
    project_camera_points,
    projection_jacobian,
)
from ..core.models import Modality, Weighting
from ..utils.images import to_gray
from .color_segmentation import ProbMap, probability_map
from .contour_modality import (
    ContourCorrespondence,
    ContourSet,
    contour_weight,
    gaussian_weight,
    project_normals,
    search_contours,
)
from .interior_flow import (
    InteriorCorrespondence,
    InteriorSet,
    compute_flow,
    interior_correspondences,
    interior_weight,
)
from .viewpoint_model import ViewpointModel, closest_view

if TYPE_CHECKING:
    from .tracker import TrackerState

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NormalEquations:
    H: np.ndarray
    g: np.ndarray

    @classmethod
    def zero(cls) -> "NormalEquations":
        return cls(np.zeros((6, 6)), np.zeros(6))


@dataclass(frozen=True)
class IterationTrace:
    """Energy before and after one GN update, both with the same frozen weights."""

    stage: int
    energy_before: float
    energy_after: float
    valid_contours: int


def _camera_points(T_CM: Pose, X_model: np.ndarray) -> np.ndarray:
    X_C = T_CM.transform(np.atleast_2d(X_model))
    if np.any(X_C[:, 2] <= 1e-6):
        raise BehindCamera("correspondence point behind the camera")
    return X_C


def _contour_jacobians(n: np.ndarray, X_C: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    d_proj = projection_jacobian(K, X_C)  # (N, 2, 3)
    d_point = point_twist_jacobian(X_C)  # (N, 3, 6)
    return np.einsum("ni,nij,njk->nk", n, d_proj, d_point)


def _interior_jacobians(target: np.ndarray, x: np.ndarray, X_C: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    diff = target - x
    r = np.linalg.norm(diff, axis=1)
    # zero where the residual vanishes; the unit direction is undefined there
    unit = np.where(r[:, None] > 0, diff / np.where(r > 0, r, 1.0)[:, None], 0.0)
    d_proj = projection_jacobian(K, X_C)
    d_point = point_twist_jacobian(X_C)
    return np.einsum("ni,nij,njk->nk", -unit, d_proj, d_point)


def contour_jacobian(corr: ContourCorrespondence, T_CM: Pose, K: CameraIntrinsics) -> np.ndarray:
    X_C = _camera_points(T_CM, corr.X_model)
    return _contour_jacobians(np.atleast_2d(corr.n), X_C, K)[0]


def interior_jacobian(corr: InteriorCorrespondence, T_CM: Pose, K: CameraIntrinsics) -> np.ndarray:
    X_C = _camera_points(T_CM, corr.X_model)
    x, _ = project_camera_points(K, X_C)
    return _interior_jacobians(np.atleast_2d(corr.x_in_prime), x, X_C, K)[0]


def contour_residuals(contours: ContourSet, T_CM: Pose, K: CameraIntrinsics) -> np.ndarray:
    """``n^T x(T) - mu`` with the contour points re-projected under ``T_CM``."""
    x, _ = project_camera_points(K, _camera_points(T_CM, contours.X_model))
    return np.einsum("nk,nk->n", contours.n, x) - contours.mu


def interior_residuals(interiors: InteriorSet, T_CM: Pose, K: CameraIntrinsics) -> np.ndarray:
    x, _ = project_camera_points(K, _camera_points(T_CM, interiors.X_model))
    return np.linalg.norm(interiors.x_in_prime - x, axis=1)


def contour_weights(contours: ContourSet, r: np.ndarray, beta: float, weighting: Weighting = Weighting.MIXTURE) -> np.ndarray:
    sigma_i = contours.sigma_shp * contours.sigma_noi
    if weighting is Weighting.GAUSSIAN:
        return np.asarray(gaussian_weight(sigma_i), dtype=np.float64)
    return np.asarray(contour_weight(r, sigma_i, beta), dtype=np.float64)


def frozen_weights(
    contours: ContourSet,
    interiors: InteriorSet,
    beta: float,
    gamma: float,
    T_CM: Pose,
    K: CameraIntrinsics,
    weighting: Weighting = Weighting.MIXTURE,
) -> Tuple[np.ndarray, np.ndarray]:
    """Contour and interior weights from the residuals at ``T_CM``."""
    w_cnt = np.zeros(0)
    w_in = np.zeros(0)
    if len(contours):
        w_cnt = contour_weights(contours, contour_residuals(contours, T_CM, K), beta, weighting)
    if len(interiors):
        w_in = np.asarray(interior_weight(interior_residuals(interiors, T_CM, K), interiors.c_in, gamma))
    return w_cnt, w_in


def accumulate(
    contour_set: ContourSet,
    interior_set: InteriorSet,
    lam: float,
    beta: float,
    gamma: float,
    T_CM: Pose,
    K: CameraIntrinsics,
    weighting: Weighting = Weighting.MIXTURE,
    weights: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> NormalEquations:
    """Weighted gradient and Gauss-Newton Hessian of the joint energy.

    ``weights`` overrides the weights computed from the current residuals.
    """
    H = np.zeros((6, 6))
    g = np.zeros(6)
    w_cnt, w_in = weights if weights is not None else frozen_weights(
        contour_set, interior_set, beta, gamma, T_CM, K, weighting
    )

    if len(contour_set) and lam > 0:
        X_C = _camera_points(T_CM, contour_set.X_model)
        x, _ = project_camera_points(K, X_C)
        r = np.einsum("nk,nk->n", contour_set.n, x) - contour_set.mu
        J = _contour_jacobians(contour_set.n, X_C, K)
        g += lam * np.einsum("n,nk->k", 0.5 * w_cnt * r, J)
        H += lam * np.einsum("n,nj,nk->jk", 0.5 * w_cnt, J, J)

    if len(interior_set) and lam < 1:
        X_C = _camera_points(T_CM, interior_set.X_model)
        x, _ = project_camera_points(K, X_C)
        r = np.linalg.norm(interior_set.x_in_prime - x, axis=1)
        J = _interior_jacobians(interior_set.x_in_prime, x, X_C, K)
        g += (1.0 - lam) * np.einsum("n,nk->k", 0.5 * w_in * r, J)
        H += (1.0 - lam) * np.einsum("n,nj,nk->jk", 0.5 * w_in, J, J)

    return NormalEquations(0.5 * (H + H.T), g)


def gn_step(ne: NormalEquations, lambda_r: float, lambda_t: float) -> Twist:
    """Solve ``(H + diag(lambda_r x3, lambda_t x3)) dxi = -g``."""
    A = ne.H + np.diag([lambda_r] * 3 + [lambda_t] * 3)
    try:
        factor = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as e:
        raise SingularSystem(f"normal equations not positive definite: {e}") from e
    return Twist.from_vector(linalg.cho_solve(factor, -ne.g))


def joint_energy(
    contour_set: ContourSet,
    interior_set: InteriorSet,
    lam: float,
    T_CM: Pose,
    K: CameraIntrinsics,
    weights: Tuple[np.ndarray, np.ndarray],
) -> float:
    """``lam * sum(w r^2 / 2) + (1 - lam) * sum(w r^2 / 2)`` with the given weights."""
    w_cnt, w_in = weights
    energy = 0.0
    if len(contour_set):
        r = contour_residuals(contour_set, T_CM, K)
        energy += lam * float(np.sum(0.5 * w_cnt * r**2))
    if len(interior_set):
        r = interior_residuals(interior_set, T_CM, K)
        energy += (1.0 - lam) * float(np.sum(0.5 * w_in * r**2))
    return energy


def backtrack(
    contour_set: ContourSet,
    interior_set: InteriorSet,
    lam: float,
    T_CM: Pose,
    K: CameraIntrinsics,
    weights: Tuple[np.ndarray, np.ndarray],
    step: Twist,
    max_halvings: int,
) -> Tuple[Pose, float, float]:
    """Apply ``step``, halving it until the frozen-weight energy does not rise.

    Returns the accepted pose with the energies before and after it; the pose
    stays ``T_CM`` when every trial step raises the energy.
    """
    before = joint_energy(contour_set, interior_set, lam, T_CM, K, weights)
    xi = step.as_vector()
    for halving in range(max_halvings + 1):
        T_next = compose(exp_se3(xi), T_CM)
        try:
            after = joint_energy(contour_set, interior_set, lam, T_next, K, weights)
        except BehindCamera:
            after = np.inf
        if after <= before:
            if halving:
                logger.debug(f"Step accepted after {halving} halvings ({before:.4g} -> {after:.4g})")
            return T_next, before, after
        xi = 0.5 * xi
    logger.debug(f"Step rejected, energy {before:.4g} kept")
    return T_CM, before, before


def find_contours(
    pm: ProbMap,
    model: ViewpointModel,
    T_CM: Pose,
    K: CameraIntrinsics,
    stage: Stage,
    config: TrackerConfig,
) -> ContourSet:
    """Project the closest template's contour and search correspondences for it."""
    view = model.views[closest_view(model, T_CM)]
    X_C = T_CM.transform(view.contour_points)
    x, in_front = project_camera_points(K, X_C)
    if not in_front.any():
        return ContourSet.empty()
    X_model = view.contour_points[in_front]
    normals = project_normals(T_CM.rotation, view.contour_normals[in_front],
                              projection_jacobian(K, X_C[in_front]))
    params = config.fan.with_stage(stage.a_reg, stage.l_src)
    found = search_contours(pm, x[in_front], normals, X_model, params, config.variance_cutoff)
    return found.only_valid()


def optimize_frame(
    state: "TrackerState",
    image: np.ndarray,
    template: ViewpointModel,
    config: TrackerConfig,
    trace: Optional[List[IterationTrace]] = None,
) -> Pose:
    """Refine ``state.pose`` against ``image`` through the coarse-to-fine schedule.

    ``trace`` collects the frozen-weight energy around every accepted GN update.
    """
    K = state.K
    frame_index = state.frame_index + 1
    schedule = config.schedule
    joint = config.modality is Modality.JOINT

    pm = probability_map(image, state.roi, state.color_model)
    interiors = InteriorSet.empty()
    if joint and config.n_in > 0:
        gray = to_gray(image)
        try:
            flow = compute_flow(state.prev_gray, gray, state.roi, config.flow)
        except RoiTooSmall as e:
            logger.warning(f"Frame {frame_index}: no interior flow ({e})")
        else:
            view = template.views[closest_view(template, state.pose)]
            interiors = interior_correspondences(
                view.interior_points, state.pose, K, flow, state.prev_gray, gray, config.flow
            )

    T = state.pose
    stages = schedule.stages
    final_valid: List[int] = []
    for index, stage in enumerate(stages):
        lam = stage.lam if joint else 1.0
        beta = schedule.b2 / stage.sigma**2
        for _ in range(stage.search_iters):
            contours = find_contours(pm, template, T, K, stage, config)
            if index == len(stages) - 1:
                final_valid.append(len(contours))
            logger.debug(
                f"Frame {frame_index} stage {index}: {len(contours)} contour, "
                f"{len(interiors)} interior correspondences"
            )
            for _ in range(schedule.gn_iters_per_search):
                weights = frozen_weights(contours, interiors, beta, stage.gamma, T, K, config.weighting)
                ne = accumulate(contours, interiors, lam, beta, stage.gamma, T, K, config.weighting, weights)
                step = gn_step(ne, schedule.lambda_r, schedule.lambda_t)
                T, before, after = backtrack(
                    contours, interiors, lam, T, K, weights, step, schedule.max_step_halvings
                )
                if trace is not None:
                    trace.append(IterationTrace(index, before, after, len(contours)))

    if min(final_valid) < config.min_valid_contours:
        raise LostTrack(
            f"frame {frame_index}: {min(final_valid)} valid contour correspondences "
            f"(< {config.min_valid_contours})",
            frame_index=frame_index,
        )
    return T
