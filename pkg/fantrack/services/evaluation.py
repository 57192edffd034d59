"""Tracking accuracy metrics: 5cm-5deg success, vertex-distance ADD and AUC."""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence as Seq

import numpy as np

from ..core.errors import MissingGroundTruth
from ..core.geometry import Pose, pose_errors
from ..core.mesh import TriangleMesh
from ..core.models import ResetPolicy
from .dataset import Sequence, Trajectory

logger = logging.getLogger(__name__)

SUCCESS_T = 0.05  # meters
SUCCESS_R = math.radians(5.0)
ADD_THRESHOLDS = (0.02, 0.05, 0.1)
AUC_MAX_K = 0.2
AUC_SAMPLES = 200
AUC_SCALE = 20.0


@dataclass
class FrameMetrics:
    e_t: float
    e_r: float
    e_T: float
    success: bool
    runtime_ms: float = 0.0


@dataclass
class MetricReport:
    per_frame: List[FrameMetrics]
    success_rate: float
    auc: float
    add_fractions: Dict[float, float]
    resets: int = 0
    policy: str = ResetPolicy.NO_RESET.value

    @property
    def mean_runtime_ms(self) -> float:
        if not self.per_frame:
            return 0.0
        return float(np.mean([f.runtime_ms for f in self.per_frame]))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["add_fractions"] = {str(k): v for k, v in self.add_fractions.items()}
        data["mean_runtime_ms"] = self.mean_runtime_ms
        return data


def is_success(T: Pose, T_gt: Pose) -> bool:
    err = pose_errors(T, T_gt)
    return err.e_t < SUCCESS_T and err.e_r < SUCCESS_R


def vertex_error(T: Pose, T_gt: Pose, vertices: np.ndarray) -> float:
    """Mean distance between the model vertices placed by both poses."""
    return float(np.mean(np.linalg.norm(T.transform(vertices) - T_gt.transform(vertices), axis=1)))


def auc_score(e_T: Seq[float], d_m: float) -> float:
    """Area under the success curve ``e_T < k d_m`` for k in (0, 0.2], scaled to 20."""
    errors = np.asarray(e_T, dtype=np.float64)
    if errors.size == 0:
        return 0.0
    k = (np.arange(AUC_SAMPLES) + 0.5) * (AUC_MAX_K / AUC_SAMPLES)
    success = (errors[None, :] < k[:, None] * d_m).mean(axis=1)
    return float(AUC_SCALE * success.mean())


def evaluate(
    sequence: Sequence,
    trajectory: Trajectory,
    policy: ResetPolicy = ResetPolicy.NO_RESET,
    d_m: Optional[float] = None,
    mesh: Optional[TriangleMesh] = None,
) -> MetricReport:
    """Score a trajectory against the sequence ground truth.

    Under the reset policy each failed frame counts one reset; the recorded
    errors of the failed frame itself are kept.
    """
    if sequence.gt_poses is None:
        raise MissingGroundTruth(f"sequence {sequence.name} has no ground-truth poses")
    if len(trajectory) != len(sequence.gt_poses):
        raise ValueError(f"trajectory has {len(trajectory)} poses for {len(sequence.gt_poses)} frames")
    mesh = mesh if mesh is not None else sequence.load_mesh()
    d_m = d_m if d_m is not None else mesh.diameter

    per_frame = []
    for pose, gt, runtime in zip(trajectory.poses, sequence.gt_poses, trajectory.runtime_ms):
        err = pose_errors(pose, gt)
        per_frame.append(FrameMetrics(
            err.e_t, err.e_r, vertex_error(pose, gt, mesh.vertices),
            err.e_t < SUCCESS_T and err.e_r < SUCCESS_R, runtime,
        ))

    n = max(len(per_frame), 1)
    successes = sum(f.success for f in per_frame)
    e_T = [f.e_T for f in per_frame]
    add = {k: 100.0 * sum(e < k * d_m for e in e_T) / n for k in ADD_THRESHOLDS}
    resets = len(per_frame) - successes if policy is ResetPolicy.RESET_5CM5DEG else 0

    report = MetricReport(per_frame, 100.0 * successes / n, auc_score(e_T, d_m), add, resets, policy.value)
    logger.debug(f"Evaluated {sequence.name}: success {report.success_rate:.1f}%, AUC {report.auc:.2f}")
    return report
