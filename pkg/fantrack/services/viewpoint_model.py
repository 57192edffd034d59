"""Sparse viewpoint templates: offline generation, storage and lookup.

Each template stores, in model coordinates, contour points with their normals
and interior points sampled from a depth rendering taken from one direction on
an icosphere around the object.
"""
import logging
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import cv2
import numpy as np
from scipy import ndimage
from tqdm import tqdm

from ..core.config import TemplateParams, TrackerConfig
from ..core.errors import (
    ChecksumMismatch,
    InsufficientCoverage,
    TemplateFormatError,
    VersionMismatch,
)
from ..core.geometry import CameraIntrinsics, Pose, backproject, look_at_pose
from ..core.mesh import TriangleMesh, icosphere
from ..core.metadata import MetadataManager
from .rasterizer import mask_from_depth, rasterize_depth

logger = logging.getLogger(__name__)

MAGIC = b"PFVM"
FORMAT_VERSION = 1
INTERIOR_CLEARANCE = 2  # pixels between interior samples and the boundary


def _f32(a: np.ndarray) -> np.ndarray:
    """Round to float32 precision so stored templates round-trip bit-exactly."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True, eq=False)
class ViewpointTemplate:
    view_dir: np.ndarray
    view_pose: Pose
    contour_points: np.ndarray  # (N_cnt, 3)
    contour_normals: np.ndarray  # (N_cnt, 3)
    interior_points: np.ndarray  # (N_in, 3)

    def equals(self, other: "ViewpointTemplate") -> bool:
        return (
            np.array_equal(self.view_dir, other.view_dir)
            and np.array_equal(self.view_pose.rotation, other.view_pose.rotation)
            and np.array_equal(self.view_pose.translation, other.view_pose.translation)
            and np.array_equal(self.contour_points, other.contour_points)
            and np.array_equal(self.contour_normals, other.contour_normals)
            and np.array_equal(self.interior_points, other.interior_points)
        )


@dataclass(frozen=True, eq=False)
class ViewpointModel:
    views: List[ViewpointTemplate]
    sphere_radius: float
    mesh_hash: bytes
    view_dirs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.views:
            raise ValueError("viewpoint model needs at least one view")
        if len(self.mesh_hash) != MetadataManager.DIGEST_SIZE:
            raise ValueError("mesh_hash must be a 32 byte digest")
        object.__setattr__(self, "view_dirs", np.stack([v.view_dir for v in self.views]))

    def equals(self, other: "ViewpointModel") -> bool:
        return (
            self.sphere_radius == other.sphere_radius
            and self.mesh_hash == other.mesh_hash
            and len(self.views) == len(other.views)
            and all(a.equals(b) for a, b in zip(self.views, other.views))
        )


def generate_viewpoints(subdivision_level: int) -> np.ndarray:
    """Unit view directions on an icosphere: 10 * 4**level + 2 of them."""
    if subdivision_level < 0:
        raise ValueError("subdivision level must be >= 0")
    vertices, _ = icosphere(subdivision_level)
    return vertices / np.linalg.norm(vertices, axis=1, keepdims=True)


def template_intrinsics(params: TemplateParams) -> CameraIntrinsics:
    return CameraIntrinsics(
        params.focal, params.focal, (params.image_width - 1) / 2.0, (params.image_height - 1) / 2.0
    )


def default_radius(mesh: TriangleMesh, params: TemplateParams) -> float:
    return params.radius_factor * 2.0 * mesh.bounding_radius


def _ordered_boundary(mask: np.ndarray) -> np.ndarray:
    """Outer boundary pixels of the largest silhouette component, in contour order."""
    contours, _ = cv2.findContours(mask.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    if not contours:
        return np.zeros((0, 2), dtype=np.int64)
    longest = max(contours, key=len)
    return longest.reshape(-1, 2).astype(np.int64)  # (col, row)


def boundary_normals(mask: np.ndarray, contour: np.ndarray, window: int = 3) -> np.ndarray:
    """Outward unit normals from the two adjacent boundary segments of each pixel."""
    n = contour.shape[0]
    if n == 0:
        return np.zeros((0, 2))
    p = contour.astype(np.float64)
    ahead = p[(np.arange(n) + window) % n] - p
    behind = p - p[(np.arange(n) - window) % n]

    def unit(v: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(v, axis=1, keepdims=True)
        return v / np.where(norm > 0, norm, 1.0)

    tangent = unit(unit(ahead) + unit(behind))
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)

    # probe two pixels along the normal; flip where it lands on the object
    h, w = mask.shape
    probe = np.rint(p + 2.0 * normal).astype(np.int64)
    px = np.clip(probe[:, 0], 0, w - 1)
    py = np.clip(probe[:, 1], 0, h - 1)
    inside = (
        (probe[:, 0] >= 0) & (probe[:, 0] < w) & (probe[:, 1] >= 0) & (probe[:, 1] < h)
    ) & mask[py, px]
    normal[inside] *= -1.0
    return unit(normal)


def build_template(
    mesh: TriangleMesh,
    K: CameraIntrinsics,
    view_dir: np.ndarray,
    radius: float,
    n_cnt: int = 200,
    n_in: int = 200,
    rng_seed: int = 0,
    width: int = 640,
    height: int = 512,
    normal_window: int = 3,
) -> ViewpointTemplate:
    """Render one view and sample contour and interior points from it."""
    view_dir = np.asarray(view_dir, dtype=np.float64)
    view_dir = view_dir / np.linalg.norm(view_dir)
    view_pose = look_at_pose(view_dir, radius)
    # stored at float32 precision, so use exactly the stored pose for sampling
    view_pose = Pose(_f32(view_pose.rotation), _f32(view_pose.translation))

    depth = rasterize_depth(mesh, K, view_pose, width, height)
    mask = mask_from_depth(depth).data

    contour = _ordered_boundary(mask)
    # boundary pixels on the image border are not silhouette edges
    on_border = (
        (contour[:, 0] == 0) | (contour[:, 1] == 0)
        | (contour[:, 0] == width - 1) | (contour[:, 1] == height - 1)
    )
    normals_2d = boundary_normals(mask, contour, normal_window)[~on_border]
    contour = contour[~on_border]

    clearance = ndimage.distance_transform_edt(mask)
    interior_rows, interior_cols = np.nonzero(clearance > INTERIOR_CLEARANCE)

    if contour.shape[0] < n_cnt or interior_rows.size < n_in:
        raise InsufficientCoverage(
            f"view {view_dir.round(3).tolist()}: {contour.shape[0]} boundary / "
            f"{interior_rows.size} interior pixels for {n_cnt}/{n_in} samples"
        )

    rng = np.random.default_rng(rng_seed)
    cnt_idx = np.sort(rng.choice(contour.shape[0], size=n_cnt, replace=False))
    in_idx = np.sort(rng.choice(interior_rows.size, size=n_in, replace=False))

    T_MC = view_pose.inverse()
    cnt_px = contour[cnt_idx]
    cnt_depth = depth.depth[cnt_px[:, 1], cnt_px[:, 0]]
    n2 = normals_2d[cnt_idx]
    # boundary pixel centres sit on average max(|nx|, |ny|) / 2 inside the silhouette edge
    edge_px = cnt_px.astype(np.float64) + 0.5 * np.abs(n2).max(axis=1, keepdims=True) * n2
    X_cnt = T_MC.transform(backproject(K, edge_px, cnt_depth))
    N_cnt = np.column_stack([n2, np.zeros(n_cnt)]) @ T_MC.rotation.T

    in_px = np.column_stack([interior_cols[in_idx], interior_rows[in_idx]])
    in_depth = depth.depth[in_px[:, 1], in_px[:, 0]]
    X_in = T_MC.transform(backproject(K, in_px.astype(np.float64), in_depth))

    return ViewpointTemplate(
        view_dir=_f32(view_dir),
        view_pose=view_pose,
        contour_points=_f32(X_cnt.reshape(-1, 3)),
        contour_normals=_f32(N_cnt.reshape(-1, 3)),
        interior_points=_f32(X_in.reshape(-1, 3)),
    )


def generate_model(
    mesh: TriangleMesh,
    config: Optional[TrackerConfig] = None,
    radius: Optional[float] = None,
    seed: int = 0,
    max_workers: int = 4,
    show_progress: bool = False,
) -> ViewpointModel:
    """Build templates for every icosphere direction, in parallel over views."""
    config = config or TrackerConfig()
    params = config.templates
    K = template_intrinsics(params)
    radius = radius if radius is not None else default_radius(mesh, params)
    directions = generate_viewpoints(params.subdivision_level)
    logger.info(f"Generating {len(directions)} templates for {mesh.name} at radius {radius:.4f} m")

    def build(index: int) -> ViewpointTemplate:
        return build_template(
            mesh, K, directions[index], radius, config.n_cnt, config.n_in,
            rng_seed=seed + index, width=params.image_width, height=params.image_height,
            normal_window=params.normal_window,
        )

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        results = executor.map(build, range(len(directions)))
        views = list(tqdm(results, total=len(directions), desc="Generating templates",
                          disable=not show_progress))

    return ViewpointModel(views, float(np.float32(radius)), MetadataManager.mesh_digest(mesh))


def closest_view(model: ViewpointModel, T_CM: Pose) -> int:
    """Index of the stored view best aligned with the current camera direction."""
    c = T_CM.camera_center()
    norm = np.linalg.norm(c)
    if norm == 0:
        return 0
    return int(np.argmax(model.view_dirs @ (c / norm)))


def save_model(model: ViewpointModel, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        model.mesh_hash,
        struct.pack("<If", len(model.views), model.sphere_radius),
    ]
    for view in model.views:
        pose_values = np.concatenate([view.view_pose.rotation.reshape(9), view.view_pose.translation])
        chunks.append(view.view_dir.astype("<f4").tobytes())
        chunks.append(pose_values.astype("<f4").tobytes())
        contour = np.hstack([view.contour_points, view.contour_normals])
        chunks.append(struct.pack("<I", contour.shape[0]))
        chunks.append(contour.astype("<f4").tobytes())
        chunks.append(struct.pack("<I", view.interior_points.shape[0]))
        chunks.append(view.interior_points.astype("<f4").tobytes())
    payload = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    logger.debug(f"Saved {len(model.views)} templates to {path} ({len(payload) + 4} bytes)")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise TemplateFormatError("unexpected end of template data")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float64)


def load_model(path: Union[str, Path]) -> ViewpointModel:
    path = Path(path)
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < 4:
        raise ChecksumMismatch(f"{path}: file too short")
    payload, stored_crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatch(f"{path}: CRC32 mismatch (truncated or corrupt file)")

    reader = _Reader(payload)
    if reader.take(4) != MAGIC:
        raise TemplateFormatError(f"{path}: not a template file")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    mesh_hash = reader.take(MetadataManager.DIGEST_SIZE)
    view_count = reader.u32()
    sphere_radius = float(reader.f32(1)[0])

    views = []
    for _ in range(view_count):
        view_dir = reader.f32(3)
        pose_values = reader.f32(12)
        n_cnt = reader.u32()
        contour = reader.f32(n_cnt * 6).reshape(n_cnt, 6)
        n_in = reader.u32()
        interior = reader.f32(n_in * 3).reshape(n_in, 3)
        views.append(
            ViewpointTemplate(
                view_dir=view_dir,
                view_pose=Pose.from_values(pose_values),
                contour_points=contour[:, :3].copy(),
                contour_normals=contour[:, 3:].copy(),
                interior_points=interior,
            )
        )
    if reader.offset != len(payload):
        raise TemplateFormatError(f"{path}: trailing bytes after last view")

    return ViewpointModel(views, sphere_radius, mesh_hash)
