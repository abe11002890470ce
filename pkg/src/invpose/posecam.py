"""Pose parameterisation and camera model.

Camera convention: pinhole at the origin looking along +z, principal point
at the image centre, pixel coordinates with y pointing down. A point
``(x, y, z)`` maps to ``(c_x + f x / z, c_y + f y / z)``; the orthographic
case (``f = inf``) maps it to ``(c_x + x, c_y + y)``.

The pose is the 7-vector ``(mu_x, mu_y, delta_x, delta_y, psi_x, psi_y, f)``:
projected rear wheel centre, projected rear->front wheel vector, the x/y
components of the axle direction in camera space (``psi_z <= 0``) and the
focal length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import BehindCameraError, ConfigError, DegenerateFrameError, PoseDomainError
from .mesh import RegistrationMeta

ORTHO = math.inf


@dataclass(frozen=True)
class Pose:
    mu: tuple[float, float]
    delta: tuple[float, float]
    psi: tuple[float, float]
    f: float = ORTHO

    def __post_init__(self):
        object.__setattr__(self, "mu", (float(self.mu[0]), float(self.mu[1])))
        object.__setattr__(self, "delta", (float(self.delta[0]), float(self.delta[1])))
        object.__setattr__(self, "psi", (float(self.psi[0]), float(self.psi[1])))
        object.__setattr__(self, "f", float(self.f))

    @property
    def orthographic(self) -> bool:
        return math.isinf(self.f)

    def psi3(self) -> np.ndarray:
        """Unit axle direction in camera space; raises if ``psi`` leaves the unit disk."""
        px, py = self.psi
        r2 = px * px + py * py
        if not r2 <= 1.0:
            raise PoseDomainError(f"psi_x^2 + psi_y^2 = {r2:.6g} > 1")
        return np.array([px, py, -math.sqrt(max(0.0, 1.0 - r2))])

    def validate(self) -> None:
        self.psi3()
        if math.hypot(*self.delta) <= 0.0:
            raise PoseDomainError("delta must be non-zero")
        if not (self.f > 0.0):
            raise PoseDomainError(f"focal length must be positive, got {self.f}")
        if not all(map(math.isfinite, self.mu + self.delta)):
            raise PoseDomainError("pose has non-finite entries")

    def as_tuple(self) -> tuple[float, ...]:
        return self.mu + self.delta + self.psi + (self.f,)

    def to_json(self) -> dict:
        return {
            "mu": list(self.mu),
            "delta": list(self.delta),
            "psi": list(self.psi),
            "f": "inf" if self.orthographic else self.f,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Pose":
        try:
            f = doc.get("f", "inf")
            if isinstance(f, str):
                if f.strip().lower() not in ("inf", "+inf", "infinity"):
                    raise ValueError(f"bad focal length {f!r}")
                f = ORTHO
            return cls(tuple(doc["mu"]), tuple(doc["delta"]), tuple(doc["psi"]), float(f))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"invalid pose JSON: {exc}") from None


def load_pose(path) -> Pose:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return Pose.from_json(doc)


@dataclass(frozen=True)
class CameraConfig:
    """Image size plus placement constants.

    ``depth_factor`` places the rear wheel centre at depth ``depth_factor * f``.
    ``alpha`` rescales camera-space geometry about the optical centre whenever
    a vertex would fall in front of the projection plane ``z = f``; this leaves
    every projected pixel unchanged.
    """

    image_dims: tuple[int, int]
    depth_factor: float = 2.0
    alpha: float = 2.0

    def __post_init__(self):
        w, h = self.image_dims
        if int(w) <= 0 or int(h) <= 0:
            raise ConfigError("image dimensions must be positive")
        object.__setattr__(self, "image_dims", (int(w), int(h)))
        if not self.depth_factor > 1.0:
            raise ConfigError("depth_factor must exceed 1")
        if not self.alpha > 0.0:
            raise ConfigError("alpha must be positive")

    @property
    def width(self) -> int:
        return self.image_dims[0]

    @property
    def height(self) -> int:
        return self.image_dims[1]

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


@dataclass(frozen=True)
class RigidTransform:
    """Similarity transform ``x -> scale * rotation @ x + translation``."""

    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * (points @ self.rotation.T) + self.translation

    def rescaled(self, factor: float) -> "RigidTransform":
        return RigidTransform(self.rotation, self.scale * factor, self.translation * factor)


def project_points(points: np.ndarray, cam: CameraConfig, f: float) -> np.ndarray:
    """Vectorised projection of camera-space points, shape (N, 3) -> (N, 2)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cx, cy = cam.center
    if math.isinf(f):
        return np.column_stack((cx + points[:, 0], cy + points[:, 1]))
    z = points[:, 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("point at or behind the camera")
    return np.column_stack((cx + f * points[:, 0] / z, cy + f * points[:, 1] / z))


def perspective_project(point, cam: CameraConfig, f: float) -> tuple[float, float]:
    u, v = project_points(np.asarray(point, dtype=np.float64)[None, :], cam, f)[0]
    return float(u), float(v)


def _orthonormal_complement(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    seed = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u1 = seed - (seed @ axis) * axis
    u1 /= np.linalg.norm(u1)
    return u1, np.cross(axis, u1)


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def pose_to_transform(pose: Pose, meta: RegistrationMeta, cam: CameraConfig) -> RigidTransform:
    """Similarity transform placing the model so that its wheel anchors hit the pose.

    The rotation maps ``axle_dir`` onto ``psi`` and spins about ``psi`` until
    the projected wheelbase points along ``delta``; scale and translation then
    put the rear wheel centre on ``mu`` and the front one on ``mu + delta``.
    Under perspective the rear wheel centre sits at depth ``depth_factor * f``.
    """
    pose.validate()
    psi = pose.psi3()
    delta = np.array(pose.delta)
    c = np.array(cam.center)
    persp = not pose.orthographic

    axle = meta.axle_dir / np.linalg.norm(meta.axle_dir)
    w = meta.wheelbase
    along = float(w @ axle)
    w_perp = w - along * axle
    h = float(np.linalg.norm(w_perp))
    if h <= 1e-12 * max(1.0, float(np.linalg.norm(w))):
        raise DegenerateFrameError("axle direction parallel to wheelbase")
    e2 = w_perp / h
    model_frame = np.column_stack((axle, e2, np.cross(axle, e2)))

    # The projected front-rear offset is linear in the rotated wheelbase v:
    # ortho -> v_xy; perspective -> v_xy - b v_z, b = normalised front image point.
    if persp:
        b = (np.array(pose.mu) + delta - c) / pose.f
        gain = 1.0 + float(np.linalg.norm(b))

        def lin(v):
            return v[:2] - b * v[2]

    else:
        gain = 1.0

        def lin(v):
            return v[:2]

    u1, u2 = _orthonormal_complement(psi)
    # rotated wheelbase: along*psi + h*(cos g u1 + sin g u2); require it parallel to delta
    k = along * _cross2(lin(psi), delta)
    p = h * _cross2(lin(u1), delta)
    q = h * _cross2(lin(u2), delta)
    r = math.hypot(p, q)
    tol = 1e-12 * max(abs(along), h) * float(np.linalg.norm(delta)) * gain
    if r <= tol:
        # the projected wheelbase stays on delta's line for every spin: take the longest one
        if abs(k) > tol:
            raise DegenerateFrameError("projected wheelbase cannot be aligned with delta")
        candidates = (math.atan2(float(lin(u2) @ delta), float(lin(u1) @ delta)),)
    else:
        if abs(k) > r * (1.0 + 1e-12):
            raise DegenerateFrameError("projected wheelbase cannot be aligned with delta")
        base = math.atan2(q, p)
        spread = math.acos(max(-1.0, min(1.0, -k / r)))
        candidates = (base + spread, base - spread)

    best = None
    for gamma in candidates:
        qv = math.cos(gamma) * u1 + math.sin(gamma) * u2
        proj = lin(along * psi + h * qv)
        dot = float(proj @ delta)
        if dot > 0.0 and (best is None or dot > best[0]):
            best = (dot, qv, proj)
    if best is None:
        raise DegenerateFrameError("projected wheelbase points against delta")
    _, qv, proj = best

    cam_frame = np.column_stack((psi, qv, np.cross(psi, qv)))
    rot = cam_frame @ model_frame.T

    rear_rot = rot @ meta.rear_wheel_center
    mu_off = np.array(pose.mu) - c
    if persp:
        z0 = cam.depth_factor * pose.f
        scale = z0 / pose.f * float(delta @ proj) / float(proj @ proj)
        rear_cam = np.array([z0 * mu_off[0] / pose.f, z0 * mu_off[1] / pose.f, z0])
        front_z = z0 + scale * float((rot @ w)[2])
        if front_z <= 0.0:
            raise BehindCameraError("front wheel centre lies behind the camera")
    else:
        scale = float(delta @ proj) / float(proj @ proj)
        rear_cam = np.array([mu_off[0], mu_off[1], 0.0])
    translation = rear_cam - scale * rear_rot
    return RigidTransform(rot, scale, translation)


def camera_space(points: np.ndarray, xf: RigidTransform, cam: CameraConfig, f: float) -> np.ndarray:
    """Transform model points to camera space, applying the alpha rescale if needed.

    Raises BehindCameraError when a point has ``z <= 0`` under perspective:
    scaling about the optical centre cannot move such a point in front of the camera.
    """
    pts = xf.apply(points)
    if math.isinf(f) or len(pts) == 0:
        return pts
    zmin = float(pts[:, 2].min())
    if zmin <= 0.0:
        raise BehindCameraError("model extends behind the camera")
    if zmin < f and cam.alpha > 1.0:
        steps = math.ceil(math.log(f / zmin) / math.log(cam.alpha))
        pts = pts * cam.alpha**steps
    return pts


@dataclass(frozen=True)
class NormalizedPose:
    """Pose scaled by the image size: all components of comparable range."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 7:
            raise ConfigError("a normalized pose has 7 components")
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def normalize_pose(pose: Pose, dims: tuple[int, int]) -> NormalizedPose:
    iw, ih = dims
    mx, my = pose.mu
    dx, dy = pose.delta
    px, py = pose.psi
    if px * px + py * py > 1.0:
        raise PoseDomainError("psi outside the unit disk")
    return NormalizedPose((mx / iw, my / ih, dx / iw, dy / ih, px, py, 10.0 * iw / pose.f))


def denormalize_pose(npose: Union[NormalizedPose, np.ndarray, tuple], dims: tuple[int, int]) -> Pose:
    vals = npose.values if isinstance(npose, NormalizedPose) else tuple(float(v) for v in npose)
    iw, ih = dims
    a, b, c, d, px, py, g = vals
    if px * px + py * py > 1.0:
        raise PoseDomainError("psi outside the unit disk")
    if g < 0.0:
        raise PoseDomainError("normalized focal parameter must be non-negative")
    f = ORTHO if g == 0.0 else 10.0 * iw / g
    return Pose((a * iw, b * ih), (c * iw, d * ih), (px, py), f)
