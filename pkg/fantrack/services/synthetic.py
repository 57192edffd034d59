"""Synthetic test sequences with known ground truth."""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence as Seq, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..core.errors import ObjectOutOfView
from ..core.geometry import CameraIntrinsics, Pose, axis_angle_rotation
from ..core.mesh import TriangleMesh, save_obj
from ..core.models import VariantKind
from ..utils.images import make_background, write_image
from .dataset import MANIFEST_NAME, Sequence, SequenceFormat, load_sequence, write_poses
from .rasterizer import SyntheticOptions, render_synthetic_frame, silhouette_mask

logger = logging.getLogger(__name__)

DEFAULT_ALBEDO = (220.0, 90.0, 40.0)


@dataclass(frozen=True)
class Variant:
    """Appearance changes applied on top of the plain rendering."""

    kind: VariantKind = VariantKind.REGULAR
    noise_sigma: float = 15.0
    gain_range: Tuple[float, float] = (0.7, 1.3)
    occluder_size: Tuple[float, float] = (0.15, 0.5)  # fraction of image width, height

    def options(self, frame: int, frames: int, width: int, height: int, seed: int) -> SyntheticOptions:
        progress = frame / max(frames - 1, 1)
        if self.kind is VariantKind.NOISE:
            return SyntheticOptions(noise_sigma=self.noise_sigma, facet_jitter=0.15, seed=seed)
        if self.kind is VariantKind.LIGHT:
            lo, hi = self.gain_range
            return SyntheticOptions(light_gain=lo + (hi - lo) * progress, facet_jitter=0.15, seed=seed)
        if self.kind is VariantKind.OCCLUSION:
            ow = int(round(self.occluder_size[0] * width))
            oh = int(round(self.occluder_size[1] * height))
            # sweeps left to right across the whole frame
            ox = int(round(-ow + (width + ow) * progress))
            oy = (height - oh) // 2
            return SyntheticOptions(occluder=(ox, oy, ow, oh), facet_jitter=0.15, seed=seed)
        return SyntheticOptions(facet_jitter=0.15, seed=seed)


def static_trajectory(pose: Pose, frames: int) -> List[Pose]:
    return [pose] * frames


def orbit_trajectory(
    start: Pose,
    frames: int,
    deg_per_frame: float = 3.0,
    axis: Seq[float] = (0.0, 1.0, 0.0),
    translation_amplitude: float = 0.03,
    period: int = 100,
) -> List[Pose]:
    """Object spinning about a camera-frame axis through its centre while swaying sideways.

    Consecutive frames differ by exactly ``deg_per_frame`` of rotation; the
    sideways motion peaks at ``2 pi amplitude / period`` per frame.
    """
    step = axis_angle_rotation(axis, math.radians(deg_per_frame))
    poses = []
    R = start.rotation.copy()
    for k in range(frames):
        offset = translation_amplitude * math.sin(2.0 * math.pi * k / period)
        poses.append(Pose(R, start.translation + np.array([offset, 0.0, 0.0])))
        R = step @ R
    return poses


def generate_synthetic_sequence(
    mesh: TriangleMesh,
    K: CameraIntrinsics,
    trajectory: List[Pose],
    variant: Variant,
    seed: int,
    out_path: Union[str, Path],
    width: int = 640,
    height: int = 512,
    albedo: Tuple[float, float, float] = DEFAULT_ALBEDO,
    show_progress: bool = False,
) -> Sequence:
    """Render the trajectory to PNG frames and write ground truth plus a manifest."""
    out = Path(out_path)
    for index, pose in enumerate(trajectory):
        if not silhouette_mask(mesh, K, pose, width, height).any():
            raise ObjectOutOfView(f"object leaves the image at frame {index}")

    out.mkdir(parents=True, exist_ok=True)
    background = make_background(width, height, seed)
    frames = len(trajectory)
    for index, pose in enumerate(tqdm(trajectory, desc="Rendering frames", disable=not show_progress)):
        options = variant.options(index, frames, width, height, seed * 100003 + index)
        image = render_synthetic_frame(mesh, K, pose, background, albedo, options)
        write_image(out / f"frame_{index:04d}.png", image)

    write_poses(out / "poses.txt", trajectory)
    mesh_name = f"{mesh.name}.obj"
    save_obj(mesh, out / mesh_name)
    fmt = SequenceFormat(
        frames="frame_*.png", poses="poses.txt", pose_units="m",
        mesh=mesh_name, intrinsics=K.to_dict(), name=out.name,
    )
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(fmt.to_dict(), f, indent=2)

    logger.info(f"Wrote {frames} {variant.kind.value} frames to {out}")
    return load_sequence(out)


def default_intrinsics(width: int = 640, height: int = 512, focal: float = 600.0) -> CameraIntrinsics:
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0)


def default_start_pose(distance: float = 0.5, tilt_deg: float = 20.0) -> Pose:
    """Object centred in front of the camera, tilted so three faces are visible."""
    R = axis_angle_rotation((1.0, 0.0, 0.0), math.radians(tilt_deg)) @ axis_angle_rotation(
        (0.0, 1.0, 0.0), math.radians(30.0)
    )
    return Pose(R, np.array([0.0, 0.0, distance]))


def make_variant(kind: Union[str, VariantKind], noise_sigma: Optional[float] = None) -> Variant:
    kind = VariantKind(kind)
    if noise_sigma is None:
        return Variant(kind)
    return Variant(kind, noise_sigma=noise_sigma)
