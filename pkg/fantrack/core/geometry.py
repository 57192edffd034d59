"""Rigid transforms, the SE(3) exponential map and pinhole projection.

Conventions:
    - ``Pose`` maps model coordinates into camera coordinates (T_CM).
    - Twists are laid out ``[w1, w2, w3, v1, v2, v3]`` and act by
      left-multiplication: ``T_new = exp(xi) @ T``.
    - Pixel coordinates are ``(column, row)``; pixel centres sit on integers.
"""
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import BehindCamera, ConfigError, NonPositiveDepth

ORTHO_TOLERANCE = 1e-9
SMALL_ANGLE = 1e-8
MIN_DEPTH = 1e-6

ArrayLike = Union[Sequence[float], np.ndarray]


def _hat(w: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform with a 3x3 rotation and a translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise ValueError("pose contains non-finite values")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_values(cls, values: ArrayLike) -> "Pose":
        """Build from 12 numbers: rotation row-major followed by translation."""
        v = np.asarray(values, dtype=np.float64).reshape(12)
        return cls(v[:9].reshape(3, 3), v[9:])

    def to_values(self) -> np.ndarray:
        return np.concatenate([self.rotation.reshape(9), self.translation])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the transform to one point (3,) or many (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))))

    def is_valid(self, tolerance: float = ORTHO_TOLERANCE) -> bool:
        return (
            self.orthonormality_error() <= tolerance
            and abs(np.linalg.det(self.rotation) - 1.0) <= tolerance
        )

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )

    def camera_center(self) -> np.ndarray:
        """Camera centre expressed in model coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation

    def __repr__(self) -> str:
        return f"Pose(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


@dataclass(frozen=True, eq=False)
class Twist:
    """Lie-algebra increment: rotation ``omega`` (rad) and translation ``v`` (m)."""

    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        omega = np.array(self.omega, dtype=np.float64).reshape(3)
        v = np.array(self.v, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(v))):
            raise ValueError("twist contains non-finite values")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vector(cls, xi: ArrayLike) -> "Twist":
        x = np.asarray(xi, dtype=np.float64).reshape(6)
        return cls(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.v])

    def __neg__(self) -> "Twist":
        return Twist(-self.omega, -self.v)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        return cls(float(data["fx"]), float(data["fy"]), float(data["cx"]), float(data["cy"]))


@dataclass(frozen=True)
class PoseError:
    e_t: float
    e_r: float


def exp_se3(xi: Union[Twist, ArrayLike]) -> Pose:
    """Exponential map of a twist; series expansion below ``SMALL_ANGLE``."""
    twist = xi if isinstance(xi, Twist) else Twist.from_vector(xi)
    w, v = twist.omega, twist.v
    theta = float(np.linalg.norm(w))
    W = _hat(w)
    W2 = W @ W
    if theta < SMALL_ANGLE:
        R = np.eye(3) + W + 0.5 * W2
        V = np.eye(3) + 0.5 * W + W2 / 6.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta**2
        c = (theta - math.sin(theta)) / theta**3
        R = np.eye(3) + a * W + b * W2
        V = np.eye(3) + b * W + c * W2
    return Pose(R, V @ v)


def compose(delta: Pose, prev: Pose) -> Pose:
    """Pose update ``delta @ prev``, re-orthonormalised when it drifts."""
    result = delta @ prev
    if result.orthonormality_error() > ORTHO_TOLERANCE:
        result = Pose(orthonormalize(result.rotation), result.translation)
    return result


def project_camera_points(K: CameraIntrinsics, X_C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of camera-frame points.

    Returns ``(pixels, in_front)``; pixels of points behind the camera are NaN.
    """
    X = np.atleast_2d(np.asarray(X_C, dtype=np.float64))
    z = X[:, 2]
    in_front = z > MIN_DEPTH
    safe_z = np.where(in_front, z, np.nan)
    px = np.stack([K.fx * X[:, 0] / safe_z + K.cx, K.fy * X[:, 1] / safe_z + K.cy], axis=1)
    return px, in_front


def project(K: CameraIntrinsics, T: Pose, X_M: ArrayLike) -> np.ndarray:
    """Project model point(s) to pixels; raises BehindCamera for Z_C <= 1e-6."""
    X = np.asarray(X_M, dtype=np.float64)
    single = X.ndim == 1
    px, in_front = project_camera_points(K, T.transform(np.atleast_2d(X)))
    if not np.all(in_front):
        raise BehindCamera("point projects behind the camera")
    return px[0] if single else px


def backproject(K: CameraIntrinsics, x: ArrayLike, d: Union[float, np.ndarray]) -> np.ndarray:
    """Camera-frame point(s) at depth ``d`` that project onto pixel(s) ``x``."""
    px = np.asarray(x, dtype=np.float64)
    depth = np.asarray(d, dtype=np.float64)
    if np.any(depth <= 0):
        raise NonPositiveDepth(f"depth must be positive, got {d}")
    single = px.ndim == 1
    px = np.atleast_2d(px)
    depth = np.broadcast_to(depth, px.shape[:1])
    X = np.stack(
        [(px[:, 0] - K.cx) / K.fx * depth, (px[:, 1] - K.cy) / K.fy * depth, depth], axis=1
    )
    return X[0] if single else X


def projection_jacobian(K: CameraIntrinsics, X_C: np.ndarray) -> np.ndarray:
    """d(pixel)/d(X_C) for each point, shape (N, 2, 3)."""
    X = np.atleast_2d(X_C)
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    iz = 1.0 / z
    J = np.zeros((X.shape[0], 2, 3))
    J[:, 0, 0] = K.fx * iz
    J[:, 0, 2] = -K.fx * x * iz * iz
    J[:, 1, 1] = K.fy * iz
    J[:, 1, 2] = -K.fy * y * iz * iz
    return J


def point_twist_jacobian(X_C: np.ndarray) -> np.ndarray:
    """d(X_C)/d(xi) = [-[X_C]x  I3] for each point, shape (N, 3, 6)."""
    X = np.atleast_2d(X_C)
    n = X.shape[0]
    J = np.zeros((n, 3, 6))
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    # -[X]x
    J[:, 0, 1] = z
    J[:, 0, 2] = -y
    J[:, 1, 0] = -z
    J[:, 1, 2] = x
    J[:, 2, 0] = y
    J[:, 2, 1] = -x
    J[:, 0, 3] = 1.0
    J[:, 1, 4] = 1.0
    J[:, 2, 5] = 1.0
    return J


def rotation_angle(R: np.ndarray) -> float:
    cos_angle = (np.trace(R) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, cos_angle))))


def pose_errors(T: Pose, T_gt: Pose) -> PoseError:
    e_t = float(np.linalg.norm(T.translation - T_gt.translation))
    e_r = rotation_angle(T.rotation.T @ T_gt.rotation)
    return PoseError(e_t, e_r)


def relative_target_pose(T_WC: Pose, T_CM: Pose, T_WT: Pose) -> Pose:
    """Target pose relative to the manipulated object: (T_WC T_CM)^-1 T_WT."""
    return (T_WC @ T_CM).inverse() @ T_WT


def assembly_check(T_MT: Pose, t_tol: float = 0.01, r_tol: float = math.radians(1.0)) -> bool:
    """True when the object sits at its target within the given tolerances."""
    err = pose_errors(T_MT, Pose.identity())
    return err.e_t < t_tol and err.e_r < r_tol


def axis_angle_rotation(axis: ArrayLike, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    return exp_se3(np.concatenate([a * angle, np.zeros(3)])).rotation


def look_at_pose(view_dir: ArrayLike, radius: float) -> Pose:
    """T_CM of a camera at ``radius * view_dir`` (model frame) looking at the origin."""
    d = np.asarray(view_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    z = -d
    helper = np.array([0.0, 0.0, 1.0]) if abs(z[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(z, helper)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R_MC = np.stack([x, y, z], axis=1)
    R_CM = R_MC.T
    return Pose(R_CM, -R_CM @ (radius * d))
