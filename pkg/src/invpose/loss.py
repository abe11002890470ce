"""Illumination-invariant loss between a photo and a projected attribute image.

With ``X`` the photo attributes (n channels) and ``Y`` the projection
attributes (m channels) sampled uniformly over a pixel population ``P``::

    loss = min(n, m) - tr[C_XY C_YY^-1 C_YX C_XX^-1]

i.e. ``min(n, m)`` minus the sum of squared canonical correlations. It is
zero exactly when some affine map sends ``Y`` onto ``X`` and is unchanged by
any invertible affine transform of either side. For ``n = m = 1`` it equals
``1 - corr(X, Y)**2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import EmptyPopulationError, ShapeError, SingularCovarianceError, TooFewPixelsError
from .mesh import Mesh
from .posecam import CameraConfig, Pose
from .raster import AttributeImage, Lighting, rasterize_attributes

RIDGE = 1e-10
MAX_COND = 1e12
MIN_PIXELS = 100


class MaskMode(str, enum.Enum):
    FULL_FRAME = "full_frame"
    MODEL_SILHOUETTE = "model_silhouette"
    PHOTO_MASK = "photo_mask"

    @classmethod
    def parse(cls, value) -> "MaskMode":
        aliases = {"full": cls.FULL_FRAME, "silhouette": cls.MODEL_SILHOUETTE, "photo": cls.PHOTO_MASK}
        if isinstance(value, cls):
            return value
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class CovStats:
    """Population means and covariance blocks; ``x`` is the photo side."""

    mean_x: np.ndarray
    mean_y: np.ndarray
    c_xx: np.ndarray
    c_yy: np.ndarray
    c_xy: np.ndarray
    count: int

    @property
    def c_yx(self) -> np.ndarray:
        return self.c_xy.T

    @property
    def n(self) -> int:
        return len(self.mean_x)

    @property
    def m(self) -> int:
        return len(self.mean_y)

    def swapped(self) -> "CovStats":
        return CovStats(self.mean_y, self.mean_x, self.c_yy, self.c_xx, self.c_xy.T.copy(), self.count)


def _mean(a: np.ndarray) -> np.ndarray:
    # exact for constant columns, so constant data has exactly zero covariance
    return np.where(np.all(a == a[0], axis=0), a[0], a.mean(axis=0))


def stats_from_samples(x, y) -> CovStats:
    """Two-pass population statistics of paired samples ``x`` (N, n) and ``y`` (N, m)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if len(x) != len(y):
        raise ShapeError("sample arrays differ in length")
    count = len(x)
    if count == 0:
        raise EmptyPopulationError("empty pixel population")
    mx = _mean(x)
    my = _mean(y)
    xc = x - mx
    yc = y - my
    c_xx = xc.T @ xc / count
    c_yy = yc.T @ yc / count
    c_xy = xc.T @ yc / count
    # exact symmetry; matmul of a matrix with its own transpose is symmetric up to rounding
    c_xx = (c_xx + c_xx.T) / 2
    c_yy = (c_yy + c_yy.T) / 2
    return CovStats(mx, my, c_xx, c_yy, c_xy, count)


def population_mask(photo: AttributeImage, proj: AttributeImage, mask_mode) -> np.ndarray:
    mode = MaskMode.parse(mask_mode)
    if photo.dims != proj.dims:
        raise ShapeError(f"photo {photo.dims} and projection {proj.dims} differ in size")
    if mode is MaskMode.FULL_FRAME:
        return np.ones(proj.mask.shape, dtype=bool)
    if mode is MaskMode.MODEL_SILHOUETTE:
        return proj.mask
    return proj.mask & photo.mask


def covariance_stats(photo: AttributeImage, proj: AttributeImage, mask_mode=MaskMode.MODEL_SILHOUETTE) -> CovStats:
    sel = population_mask(photo, proj, mask_mode)
    return stats_from_samples(photo.channels[sel], proj.channels[sel])


def _conditioned(c: np.ndarray) -> np.ndarray:
    """Return ``c``, ridge-regularised only if it is singular or ill-conditioned."""
    dim = c.shape[0]
    eig = np.linalg.eigvalsh(c)
    if eig[0] > 0.0 and eig[-1] <= MAX_COND * eig[0]:
        return c
    tr = float(np.trace(c))
    if not tr > 0.0:
        raise SingularCovarianceError("covariance is zero (constant attributes)")
    c = c + (RIDGE * tr / dim) * np.eye(dim)
    eig = np.linalg.eigvalsh(c)
    if not (eig[0] > 0.0 and eig[-1] <= MAX_COND * eig[0]):
        raise SingularCovarianceError(f"covariance condition number exceeds {MAX_COND:g}")
    return c


def canonical_trace(stats: CovStats) -> float:
    """``tr[C_XY C_YY^-1 C_YX C_XX^-1]`` computed as a squared Frobenius norm."""
    lx = np.linalg.cholesky(_conditioned(stats.c_xx))
    ly = np.linalg.cholesky(_conditioned(stats.c_yy))
    w = solve_triangular(lx, stats.c_xy, lower=True)
    w = solve_triangular(ly, w.T, lower=True)
    return float(np.sum(w * w))


def invariant_loss(stats: CovStats) -> float:
    k = min(stats.n, stats.m)
    return min(float(k), max(0.0, k - canonical_trace(stats)))


def fit_lighting(stats: CovStats) -> Lighting:
    """Least-squares affine map from projection attributes to photo intensities.

    ``A = C_XY C_YY^-1`` and ``b = mean_x - A mean_y``: the exact minimiser of
    ``E[|A Y + b - X|^2]`` over the population.
    """
    factor = cho_factor(_conditioned(stats.c_yy))
    A = cho_solve(factor, stats.c_yx).T
    b = stats.mean_x - A @ stats.mean_y
    return Lighting(A, b)


def mahalanobis_distance(stats: CovStats, light: Lighting) -> float:
    """``E[|A Y + b - X|^2]`` in the photo-covariance Mahalanobis norm.

    Evaluated in closed form from the second-order statistics.
    """
    A, b = light.A, light.b
    if A.shape != (stats.n, stats.m):
        raise ShapeError(f"lighting shape {A.shape} does not match statistics ({stats.n}, {stats.m})")
    bias = A @ stats.mean_y + b - stats.mean_x
    resid = np.outer(bias, bias) + A @ stats.c_yy @ A.T - A @ stats.c_yx - stats.c_xy @ A.T + stats.c_xx
    factor = cho_factor(_conditioned(stats.c_xx))
    return float(np.trace(cho_solve(factor, resid)))


@dataclass(frozen=True)
class LossReport:
    loss: float
    lighting: Lighting
    pixels: int

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "A": [float(v) for v in self.lighting.A.ravel()],
            "b": float(self.lighting.b[0]) if self.lighting.b.size == 1 else [float(v) for v in self.lighting.b],
            "pixels": self.pixels,
        }


def _pose_stats(photo, mesh, pose, cam, mask_mode, min_pixels):
    if photo.dims != cam.image_dims:
        raise ShapeError(f"photo size {photo.dims} differs from camera {cam.image_dims}")
    proj = rasterize_attributes(mesh, pose, cam)
    covered = int(proj.mask.sum())
    if covered < min_pixels:
        raise TooFewPixelsError(covered, min_pixels)
    sel = population_mask(photo, proj, mask_mode)
    count = int(sel.sum())
    if count < min_pixels:
        raise TooFewPixelsError(count, min_pixels)
    return stats_from_samples(photo.channels[sel], proj.channels[sel])


def pose_loss(
    photo: AttributeImage,
    mesh: Mesh,
    pose: Pose,
    cam: CameraConfig,
    mask_mode=MaskMode.MODEL_SILHOUETTE,
    min_pixels: int = MIN_PIXELS,
) -> float:
    """Invariant loss between ``photo`` and the mesh rendered at ``pose``."""
    return invariant_loss(_pose_stats(photo, mesh, pose, cam, mask_mode, min_pixels))


def pose_loss_report(photo, mesh, pose, cam, mask_mode=MaskMode.MODEL_SILHOUETTE, min_pixels: int = MIN_PIXELS) -> LossReport:
    stats = _pose_stats(photo, mesh, pose, cam, mask_mode, min_pixels)
    return LossReport(invariant_loss(stats), fit_lighting(stats), stats.count)
