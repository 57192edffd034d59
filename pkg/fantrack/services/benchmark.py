"""Drive the tracker over whole sequences and score the result."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

from tqdm import tqdm

from ..core.config import TrackerConfig
from ..core.errors import LostTrack, MissingGroundTruth
from ..core.geometry import Pose
from ..core.mesh import TriangleMesh
from ..core.models import ResetPolicy
from ..utils.images import read_image
from . import tracker
from .dataset import Sequence, Trajectory, load_sequence
from .evaluation import MetricReport, evaluate, is_success
from .viewpoint_model import ViewpointModel, generate_model, load_model, save_model

logger = logging.getLogger(__name__)

TEMPLATE_FILE = "templates.pfvm"


@dataclass
class TrackingRun:
    trajectory: Trajectory
    resets: int = 0
    lost_frames: List[int] = field(default_factory=list)


def run_tracking(
    sequence: Sequence,
    mesh: TriangleMesh,
    model: ViewpointModel,
    config: TrackerConfig,
    policy: ResetPolicy = ResetPolicy.NO_RESET,
    init_pose: Optional[Pose] = None,
    show_progress: bool = False,
) -> TrackingRun:
    """Track every frame after the first, which is taken at ``init_pose`` (or ground truth).

    With the reset policy the tracker restarts from ground truth after any
    frame that misses 5cm-5deg; without it, lost frames keep the last pose.
    """
    if sequence.intrinsics is None:
        raise ValueError(f"sequence {sequence.name} has no intrinsics")
    resetting = policy is ResetPolicy.RESET_5CM5DEG
    if (resetting or init_pose is None) and sequence.gt_poses is None:
        raise MissingGroundTruth(f"sequence {sequence.name} has no ground truth for init/reset")
    K = sequence.intrinsics
    start = init_pose if init_pose is not None else sequence.gt_poses[0]

    first = read_image(sequence.frames[0])
    state = tracker.init(mesh, model, K, first, start, config)
    poses, runtimes = [start], [0.0]
    run = TrackingRun(Trajectory(poses, runtimes))

    frames = range(1, len(sequence.frames))
    for index in tqdm(frames, desc=f"Tracking {sequence.name}", disable=not show_progress):
        image = read_image(sequence.frames[index])
        began = time.perf_counter()
        try:
            state, pose = tracker.track(state, image, model, config)
        except LostTrack as e:
            run.lost_frames.append(index)
            state, pose = e.state, e.state.pose
        runtimes.append((time.perf_counter() - began) * 1000.0)
        poses.append(pose)

        if resetting and not is_success(pose, sequence.gt_poses[index]):
            run.resets += 1
            state = tracker.init(mesh, model, K, image, sequence.gt_poses[index], config, frame_index=index)

    run.trajectory = Trajectory(poses, runtimes)
    logger.info(
        f"Tracked {sequence.name}: {len(poses)} frames, {run.resets} resets, {len(run.lost_frames)} lost"
    )
    return run


def load_or_generate_templates(sequence: Sequence, mesh: TriangleMesh, config: TrackerConfig,
                               max_workers: int = 4) -> ViewpointModel:
    """Templates cached next to the sequence, built on first use."""
    path = sequence.root / TEMPLATE_FILE
    if path.exists():
        return load_model(path)
    model = generate_model(mesh, config, max_workers=max_workers)
    save_model(model, path)
    return model


def bench_sequence(path: Union[str, Path], config: TrackerConfig, policy: ResetPolicy) -> Tuple[str, MetricReport]:
    sequence = load_sequence(path)
    mesh = sequence.load_mesh()
    model = load_or_generate_templates(sequence, mesh, config)
    run = run_tracking(sequence, mesh, model, config, policy)
    report = evaluate(sequence, run.trajectory, policy, mesh=mesh)
    if policy is ResetPolicy.RESET_5CM5DEG:
        report.resets = run.resets
    return sequence.name, report


def bench(
    paths: List[Union[str, Path]],
    config: TrackerConfig,
    policy: ResetPolicy = ResetPolicy.RESET_5CM5DEG,
    max_workers: int = 2,
) -> List[Tuple[str, MetricReport]]:
    """Benchmark sequences in parallel; results come back in input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(bench_sequence, p, config, policy) for p in paths]
        return [f.result() for f in futures]
