"""Triangle meshes: validation, Wavefront OBJ I/O and primitive shapes."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from .errors import InvalidMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices in meters (model frame) and triangles as vertex index triples."""

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = field(default="mesh")

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.shape[0] == 0:
            raise InvalidMesh("mesh needs at least one triangle")
        if not np.all(np.isfinite(vertices)):
            raise InvalidMesh("mesh has NaN or infinite vertices")
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise InvalidMesh("triangle index out of range")
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @property
    def bounding_radius(self) -> float:
        """Radius of the origin-centred sphere enclosing every vertex."""
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def diameter(self) -> float:
        """Largest distance between two vertices (d_m of the ADD metrics)."""
        v = self.vertices
        best = 0.0
        # blockwise to keep memory flat for large meshes
        for start in range(0, v.shape[0], 1024):
            block = v[start:start + 1024]
            d2 = np.sum((block[:, None, :] - v[None, :, :]) ** 2, axis=2)
            best = max(best, float(d2.max()))
        return math.sqrt(best)


def load_obj(path: Union[str, Path]) -> TriangleMesh:
    """Read the ``v``/``f`` records of an OBJ file; polygons are fan-triangulated."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Mesh file does not exist: {path}")

    vertices: List[Tuple[float, float, float]] = []
    triangles: List[Tuple[int, int, int]] = []
    with open(path, "r") as f:
        for line_number, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise InvalidMesh(f"{path}:{line_number}: vertex needs 3 coordinates")
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif parts[0] == "f":
                indices = []
                for token in parts[1:]:
                    idx = int(token.split("/")[0])
                    # OBJ is 1-based; negative indices count back from the end
                    indices.append(idx - 1 if idx > 0 else len(vertices) + idx)
                for k in range(1, len(indices) - 1):
                    triangles.append((indices[0], indices[k], indices[k + 1]))

    logger.debug(f"Loaded {path.name}: {len(vertices)} vertices, {len(triangles)} triangles")
    return TriangleMesh(np.array(vertices), np.array(triangles), name=path.stem)


def save_obj(mesh: TriangleMesh, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(f"# {mesh.name}\n")
        for x, y, z in mesh.vertices:
            f.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def icosphere(level: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit icosphere vertices and triangles after ``level`` 4-way subdivisions."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    points = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]

    for _ in range(level):
        midpoints: Dict[Tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoints:
                m = points[a] + points[b]
                points.append(m / np.linalg.norm(m))
                midpoints[key] = len(points) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = refined

    return np.array(points), np.array(faces, dtype=np.int64)


def make_sphere(radius: float, level: int = 3) -> TriangleMesh:
    verts, faces = icosphere(level)
    return TriangleMesh(verts * radius, faces, name="sphere")


def make_box(size_x: float, size_y: float, size_z: float) -> TriangleMesh:
    hx, hy, hz = size_x / 2.0, size_y / 2.0, size_z / 2.0
    verts = np.array(
        [
            (-hx, -hy, -hz), (hx, -hy, -hz), (hx, hy, -hz), (-hx, hy, -hz),
            (-hx, -hy, hz), (hx, -hy, hz), (hx, hy, hz), (-hx, hy, hz),
        ]
    )
    faces = np.array(
        [
            (0, 2, 1), (0, 3, 2),  # -z
            (4, 5, 6), (4, 6, 7),  # +z
            (0, 1, 5), (0, 5, 4),  # -y
            (3, 7, 6), (3, 6, 2),  # +y
            (0, 4, 7), (0, 7, 3),  # -x
            (1, 2, 6), (1, 6, 5),  # +x
        ]
    )
    return TriangleMesh(verts, faces, name="box")


def make_cylinder(radius: float, height: float, segments: int = 32) -> TriangleMesh:
    """Closed cylinder around the model z axis, centred on the origin."""
    angles = np.arange(segments) * (2.0 * math.pi / segments)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    hz = height / 2.0
    bottom = np.column_stack([ring, np.full(segments, -hz)])
    top = np.column_stack([ring, np.full(segments, hz)])
    verts = np.vstack([bottom, top, [(0.0, 0.0, -hz), (0.0, 0.0, hz)]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((i, j, segments + j))
        faces.append((i, segments + j, segments + i))
        faces.append((cb, j, i))
        faces.append((ct, segments + i, segments + j))
    return TriangleMesh(verts, np.array(faces), name="cylinder")


PRIMITIVES = {
    "sphere": lambda size: make_sphere(size / 2.0),
    "box": lambda size: make_box(size, size * 0.8, size * 0.6),
    "cylinder": lambda size: make_cylinder(size / 3.0, size),
}
