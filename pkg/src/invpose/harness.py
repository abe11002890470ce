"""Loss landscapes and silhouette-margin masks."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyPopulationError, NumericalError, PoseDomainError
from .loss import MaskMode, pose_loss
from .mesh import Mesh
from .posecam import CameraConfig, Pose, denormalize_pose, normalize_pose
from .raster import AttributeImage, rasterize_attributes

ZERO_CENTER_SCALE = 0.05


@dataclass(frozen=True)
class LandscapeSpec:
    param_i: int
    param_j: int
    range: float = 0.20
    steps: int = 41

    def __post_init__(self):
        if not (0 <= self.param_i < 7 and 0 <= self.param_j < 7):
            raise ConfigError("landscape parameters must be indices in 0..6")
        if self.param_i == self.param_j:
            raise ConfigError("landscape needs two distinct parameters")
        if not self.range > 0:
            raise ConfigError("landscape range must be positive")
        if self.steps < 1:
            raise ConfigError("landscape needs at least one step")

    def offsets(self) -> np.ndarray:
        if self.steps == 1:
            return np.zeros(1)
        return np.linspace(-self.range, self.range, self.steps)


@dataclass(frozen=True)
class LandscapeCell:
    i_offset: float
    j_offset: float
    loss: float
    error: str = ""


def offset_value(center: float, offset: float) -> float:
    """Multiplicative offset ``center * (1 + offset)``; additive for a zero centre."""
    if center == 0.0:
        return offset * ZERO_CENTER_SCALE
    return center * (1.0 + offset)


def run_landscape(
    photo: AttributeImage,
    mesh: Mesh,
    center_pose: Pose,
    spec: LandscapeSpec,
    cam: CameraConfig,
    mask_mode=MaskMode.MODEL_SILHOUETTE,
) -> list[LandscapeCell]:
    """Evaluate the loss on a ``steps x steps`` grid around ``center_pose``, row-major in ``param_i``."""
    center = normalize_pose(center_pose, cam.image_dims).as_array()
    sentinel = float(min(photo.n_channels, 4) + 1)
    cells = []
    for oi in spec.offsets():
        for oj in spec.offsets():
            vec = center.copy()
            vec[spec.param_i] = offset_value(center[spec.param_i], oi)
            vec[spec.param_j] = offset_value(center[spec.param_j], oj)
            try:
                loss = pose_loss(photo, mesh, denormalize_pose(vec, cam.image_dims), cam, mask_mode)
                cells.append(LandscapeCell(float(oi), float(oj), loss))
            except (PoseDomainError, NumericalError) as exc:
                cells.append(LandscapeCell(float(oi), float(oj), sentinel, type(exc).__name__))
    return cells


def landscape_csv(cells: list[LandscapeCell]) -> str:
    buf = io.StringIO()
    buf.write("i_offset,j_offset,loss,error\n")
    for c in cells:
        buf.write(f"{c.i_offset:.9g},{c.j_offset:.9g},{c.loss:.9g},{c.error}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class MaskSpec:
    margin: float = 1.2

    def __post_init__(self):
        if not self.margin >= 1.0:
            raise ConfigError("mask margin must be >= 1")


def scale_mask(silhouette: np.ndarray, margin: float) -> np.ndarray:
    """Scale a boolean silhouette about its centroid by ``margin`` (nearest-pixel lookup).

    The result always contains the input silhouette.
    """
    silhouette = np.asarray(silhouette, dtype=bool)
    ys, xs = np.nonzero(silhouette)
    if len(xs) == 0:
        raise EmptyPopulationError("empty silhouette")
    cx = xs.mean() + 0.5
    cy = ys.mean() + 0.5
    h, w = silhouette.shape
    gy, gx = np.mgrid[0:h, 0:w]
    sx = np.floor(cx + (gx + 0.5 - cx) / margin).astype(np.int64)
    sy = np.floor(cy + (gy + 0.5 - cy) / margin).astype(np.int64)
    inside = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    out = np.zeros_like(silhouette)
    out[inside] = silhouette[sy[inside], sx[inside]]
    return out | silhouette


def generate_mask(mesh: Mesh, init_pose: Pose, cam: CameraConfig, spec: MaskSpec = MaskSpec()) -> np.ndarray:
    """Foreground mask: the model silhouette at ``init_pose`` enlarged by ``spec.margin``."""
    sil = rasterize_attributes(mesh, init_pose, cam).mask
    return scale_mask(sil, spec.margin)
