"""Synthetic scenes shared by the test modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from invpose.loss import MaskMode
from invpose.mesh import Mesh
from invpose.posecam import CameraConfig, Pose, denormalize_pose, normalize_pose
from invpose.raster import AttributeImage, Lighting, rasterize_attributes, shade
from invpose.shapes import box_car, torus, uv_sphere

W, H = 320, 240
CAM = CameraConfig((W, H))

ORTHO_POSE = Pose((110.0, 170.0), (120.0, -15.0), (0.45, -0.3))
PERSP_POSE = Pose((150.0, 170.0), (110.0, -10.0), (0.4, -0.3), 800.0)
LIGHT = Lighting.from_components(0.6, 0.5, (0.3, -0.6, -0.7), 0.25)


@dataclass
class Scene:
    mesh: Mesh
    pose: Pose
    light: Lighting
    photo: AttributeImage
    cam: CameraConfig = CAM

    @property
    def theta(self) -> np.ndarray:
        return normalize_pose(self.pose, self.cam.image_dims).as_array()


def render_photo(mesh: Mesh, pose: Pose, light: Lighting, cam: CameraConfig = CAM, bg: float = 0.0) -> AttributeImage:
    return shade(rasterize_attributes(mesh, pose, cam), light, background=bg)


def make_scene(mesh: Mesh | None = None, pose: Pose = ORTHO_POSE, light: Lighting = LIGHT,
               cam: CameraConfig = CAM) -> Scene:
    mesh = box_car() if mesh is None else mesh
    return Scene(mesh, pose, light, render_photo(mesh, pose, light, cam), cam)


def random_light(rng: np.random.Generator) -> Lighting:
    """Random lighting whose intensities stay inside [0, 1] for reflectances in [0, 1].

    The offset covers the most negative diffuse term, so clamping never acts.
    """
    L = rng.normal(size=3)
    L[2] = -abs(L[2]) - 0.5  # mostly facing the camera
    i_d = rng.uniform(0.15, 0.35)
    return Lighting.from_components(rng.uniform(0.05, 0.25), i_d, L, i_d + rng.uniform(0.0, 0.05))


def random_pose(rng: np.random.Generator, cam: CameraConfig = CAM, perspective: bool | None = None) -> Pose:
    """A pose that keeps a wheelbase-2 model comfortably inside the frame."""
    w, h = cam.image_dims
    ang = rng.uniform(-0.5, 0.5)
    length = rng.uniform(0.25, 0.4) * w
    delta = (length * np.cos(ang), length * np.sin(ang))
    mu = (w / 2 - delta[0] / 2 + rng.uniform(-10, 10), h / 2 - delta[1] / 2 + rng.uniform(-10, 10))
    r = rng.uniform(0.1, 0.6)
    phi = rng.uniform(0, 2 * np.pi)
    psi = (r * np.cos(phi), r * np.sin(phi))
    if perspective is None:
        perspective = bool(rng.integers(2))
    f = rng.uniform(2.0, 5.0) * w if perspective else np.inf
    return Pose(mu, delta, psi, f)


def random_mesh(rng: np.random.Generator, kind: str) -> Mesh:
    if kind == "sphere":
        return uv_sphere(radius=rng.uniform(0.8, 1.2), k_a=rng.uniform(0.1, 0.5), k_d=rng.uniform(0.4, 0.9))
    if kind == "torus":
        return torus(major=rng.uniform(0.8, 1.1), minor=rng.uniform(0.25, 0.45))
    return box_car(length=rng.uniform(3.6, 4.4), width=rng.uniform(1.6, 2.0))


def perturb(theta: np.ndarray, rng: np.random.Generator, frac: float, free: np.ndarray | None = None) -> np.ndarray:
    """Multiply each (free) normalized parameter by ``1 + U(-frac, frac)``."""
    out = theta.copy()
    free = np.ones(len(theta), dtype=bool) if free is None else free
    out[free] *= 1.0 + rng.uniform(-frac, frac, size=int(free.sum()))
    return out


def normalized_error(a: np.ndarray, b: np.ndarray) -> float:
    """Largest absolute difference between two normalized pose vectors."""
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def pose_from_theta(theta, cam: CameraConfig = CAM) -> Pose:
    return denormalize_pose(theta, cam.image_dims)


SILHOUETTE = MaskMode.MODEL_SILHOUETTE
