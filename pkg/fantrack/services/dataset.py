"""Sequence loading, ground-truth parsing and trajectory files.

A sequence is a directory of frames plus an optional ``sequence.json``
manifest naming the intrinsics, the mesh and the ground-truth pose file::

    {
      "name": "ape_regular",
      "intrinsics": {"fx": 650.0, "fy": 650.0, "cx": 320.0, "cy": 256.0},
      "mesh": "ape.obj",
      "frames": "frame_*.png",
      "poses": "poses.txt",
      "pose_units": "mm",
      "header_lines": 0
    }
"""
import csv
import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..core.errors import MalformedPoseLine, MissingFrames
from ..core.geometry import CameraIntrinsics, Pose
from ..core.mesh import TriangleMesh, load_obj

logger = logging.getLogger(__name__)

MANIFEST_NAME = "sequence.json"
UNIT_SCALE = {"m": 1.0, "mm": 1e-3}
TRAJECTORY_HEADER = (
    ["frame_index"]
    + [f"r{i}{j}" for i in range(3) for j in range(3)]
    + ["tx", "ty", "tz", "runtime_ms"]
)


@dataclass(frozen=True)
class SequenceFormat:
    """How frames and ground truth are laid out on disk."""

    frames: str = "*.png"
    poses: Optional[str] = "poses.txt"
    pose_units: str = "m"
    header_lines: int = 0
    mesh: Optional[str] = None
    intrinsics: Optional[dict] = None
    name: Optional[str] = None

    def __post_init__(self) -> None:
        if self.pose_units not in UNIT_SCALE:
            raise ValueError(f"pose_units must be one of {sorted(UNIT_SCALE)}, got {self.pose_units!r}")
        if self.header_lines < 0:
            raise ValueError("header_lines must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "SequenceFormat":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sequence manifest keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Sequence:
    name: str
    root: Path
    frames: List[Path]
    intrinsics: Optional[CameraIntrinsics] = None
    gt_poses: Optional[List[Pose]] = None
    mesh_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.gt_poses is not None and len(self.gt_poses) != len(self.frames):
            raise MissingFrames(
                f"{self.name}: {len(self.frames)} frames but {len(self.gt_poses)} ground-truth poses"
            )

    def __len__(self) -> int:
        return len(self.frames)

    def load_mesh(self) -> TriangleMesh:
        if self.mesh_path is None:
            raise FileNotFoundError(f"sequence {self.name} names no mesh")
        return load_obj(self.mesh_path)


@dataclass
class Trajectory:
    """Estimated poses per frame with the time spent on each."""

    poses: List[Pose]
    runtime_ms: List[float] = field(default_factory=list)
    frame_indices: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.frame_indices:
            self.frame_indices = list(range(len(self.poses)))
        if not self.runtime_ms:
            self.runtime_ms = [0.0] * len(self.poses)

    def __len__(self) -> int:
        return len(self.poses)


def parse_pose_line(line: str, line_number: int, units: str = "m") -> Pose:
    tokens = [t for t in re.split(r"[\s,]+", line.strip()) if t]
    if len(tokens) != 12:
        raise MalformedPoseLine(f"expected 12 numbers, found {len(tokens)}", line_number)
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError as e:
        raise MalformedPoseLine(str(e), line_number) from e
    values[9:] *= UNIT_SCALE[units]
    return Pose.from_values(values)


def read_poses(path: Union[str, Path], units: str = "m", header_lines: int = 0) -> List[Pose]:
    poses = []
    with open(path, "r") as f:
        for line_number, line in enumerate(f, start=1):
            if line_number <= header_lines or not line.strip():
                continue
            poses.append(parse_pose_line(line, line_number, units))
    return poses


def write_poses(path: Union[str, Path], poses: List[Pose]) -> None:
    """Ground-truth style pose file in meters, one pose per line."""
    with open(path, "w") as f:
        for pose in poses:
            f.write(" ".join(f"{v:.17g}" for v in pose.to_values()) + "\n")


def load_sequence(path: Union[str, Path], format_config: Optional[SequenceFormat] = None) -> Sequence:
    """Frames sorted by name plus optional ground truth.

    ``format_config`` overrides the manifest, which overrides the defaults.
    """
    root = Path(path)
    if not root.is_dir():
        raise MissingFrames(f"sequence directory does not exist: {root}")

    fmt = SequenceFormat()
    manifest = root / MANIFEST_NAME
    if manifest.exists():
        with open(manifest, "r") as f:
            fmt = SequenceFormat.from_dict(json.load(f))
    if format_config is not None:
        fmt = format_config

    frames = sorted(root.glob(fmt.frames))
    if not frames:
        raise MissingFrames(f"no frames matching {fmt.frames!r} in {root}")

    gt_poses = None
    if fmt.poses:
        pose_path = root / fmt.poses
        if pose_path.exists():
            gt_poses = read_poses(pose_path, fmt.pose_units, fmt.header_lines)

    intrinsics = CameraIntrinsics.from_dict(fmt.intrinsics) if fmt.intrinsics else None
    mesh_path = root / fmt.mesh if fmt.mesh else None
    sequence = Sequence(fmt.name or root.name, root, frames, intrinsics, gt_poses, mesh_path)
    logger.debug(
        f"Loaded sequence {sequence.name}: {len(frames)} frames, "
        f"{'with' if gt_poses is not None else 'without'} ground truth"
    )
    return sequence


def save_trajectory(path: Union[str, Path], trajectory: Trajectory) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_HEADER)
        for index, pose, runtime in zip(trajectory.frame_indices, trajectory.poses, trajectory.runtime_ms):
            writer.writerow([index] + [repr(float(v)) for v in pose.to_values()] + [f"{runtime:.3f}"])


def load_trajectory(path: Union[str, Path]) -> Trajectory:
    poses, runtimes, indices = [], [], []
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: not a trajectory file")
        for line_number, row in enumerate(reader, start=2):
            if len(row) != len(TRAJECTORY_HEADER):
                raise MalformedPoseLine(f"expected {len(TRAJECTORY_HEADER)} columns", line_number)
            indices.append(int(row[0]))
            poses.append(Pose.from_values([float(v) for v in row[1:13]]))
            runtimes.append(float(row[13]))
    return Trajectory(poses, runtimes, indices)
