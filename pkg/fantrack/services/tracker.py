"""Per-frame tracking: state initialisation, pose update and model refresh."""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..core.config import TrackerConfig
from ..core.errors import BehindCamera, EmptyRegion, LostTrack, ObjectOutOfView, SingularSystem, StaleTemplates
from ..core.geometry import CameraIntrinsics, Pose
from ..core.mesh import TriangleMesh
from ..core.metadata import MetadataManager
from ..core.models import Rect
from ..utils.images import to_gray
from .color_segmentation import ColorModel, update_color_model
from .joint_optimizer import optimize_frame
from .rasterizer import silhouette_mask
from .viewpoint_model import ViewpointModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrackerState:
    """Everything carried from one frame to the next for one object."""

    pose: Pose
    color_model: ColorModel
    roi: Rect
    prev_gray: np.ndarray  # full frame; only the ROI is read
    frame_index: int
    K: CameraIntrinsics
    mesh: TriangleMesh
    image_size: Tuple[int, int]  # width, height

    def advanced(self) -> "TrackerState":
        return dataclasses.replace(self, frame_index=self.frame_index + 1)


def object_roi(mesh: TriangleMesh, K: CameraIntrinsics, T: Pose, width: int, height: int,
               margin: int) -> Tuple[Rect, np.ndarray]:
    """Silhouette of the object and its bounding box grown by ``margin``, clipped to the image."""
    silhouette = silhouette_mask(mesh, K, T, width, height)
    box = Rect.from_mask(silhouette)
    if box.is_empty:
        raise ObjectOutOfView("object silhouette does not intersect the image")
    return box.expand(margin).clip(width, height), silhouette


def _refresh_colors(model: ColorModel, image: np.ndarray, silhouette: np.ndarray, roi: Rect,
                    frame_index: int, margin: int, **rates) -> ColorModel:
    try:
        return update_color_model(model, image, silhouette, roi, margin=margin, **rates)
    except EmptyRegion as e:
        logger.warning(f"Frame {frame_index}: color model kept ({e})")
        return e.model


def init(
    mesh: TriangleMesh,
    model: ViewpointModel,
    K: CameraIntrinsics,
    image: np.ndarray,
    initial_pose: Pose,
    config: TrackerConfig,
    frame_index: int = 0,
) -> TrackerState:
    """Start tracking from a known pose; the color model is learned from this frame alone."""
    if model.mesh_hash != MetadataManager.mesh_digest(mesh):
        raise StaleTemplates("templates were generated from a different mesh")
    height, width = image.shape[:2]
    roi, silhouette = object_roi(mesh, K, initial_pose, width, height, config.roi_margin)

    colors = ColorModel.uniform(config.color.bins, config.color.learn_rate_f, config.color.learn_rate_b)
    colors = _refresh_colors(colors, image, silhouette, roi, frame_index, config.color.boundary_margin,
                             learn_rate_f=1.0, learn_rate_b=1.0)

    logger.debug(f"Initialised tracker at frame {frame_index}, ROI {roi}")
    return TrackerState(initial_pose, colors, roi, to_gray(image), frame_index, K, mesh, (width, height))


def track(
    state: TrackerState,
    image: np.ndarray,
    template_model: ViewpointModel,
    config: TrackerConfig,
) -> Tuple[TrackerState, Pose]:
    """Track one frame; on loss ``LostTrack.state`` holds the state to continue from."""
    width, height = state.image_size
    if image.shape[:2] != (height, width):
        raise ValueError(f"frame is {image.shape[1]}x{image.shape[0]}, expected {width}x{height}")

    try:
        pose = optimize_frame(state, image, template_model, config)
        roi, silhouette = object_roi(state.mesh, state.K, pose, width, height, config.roi_margin)
    except (LostTrack, ObjectOutOfView, SingularSystem, BehindCamera) as e:
        logger.warning(f"Lost track at frame {state.frame_index + 1}: {e}")
        raise LostTrack(str(e), state=state.advanced(), frame_index=state.frame_index + 1) from e

    colors = _refresh_colors(state.color_model, image, silhouette, roi, state.frame_index + 1,
                             config.color.boundary_margin)
    new_state = dataclasses.replace(
        state,
        pose=pose,
        color_model=colors,
        roi=roi,
        prev_gray=to_gray(image),
        frame_index=state.frame_index + 1,
    )
    return new_state, pose
