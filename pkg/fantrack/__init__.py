"""
fantrack - monocular 6DoF object pose tracking.
"""

__version__ = "0.1.0"

from .core.config import TrackerConfig
from .core.geometry import CameraIntrinsics, Pose, Twist
from .core.mesh import TriangleMesh, load_obj
from .services.tracker import TrackerState, init, track
from .services.viewpoint_model import ViewpointModel, generate_model, load_model, save_model

__all__ = [
    "TrackerConfig",
    "CameraIntrinsics",
    "Pose",
    "Twist",
    "TriangleMesh",
    "load_obj",
    "TrackerState",
    "init",
    "track",
    "ViewpointModel",
    "generate_model",
    "load_model",
    "save_model",
]
