"""Software rasterisation of attribute images and affine (Lambertian) shading.

A projection ``M`` carries four channels per covered pixel,
``(k_a, k_d * nx, k_d * ny, k_d * nz)``, with the normal expressed in camera
space. Any rendering under a single aggregated light is then an affine
function of ``M``: ``I = A @ M + b`` with ``A = (I_a, I_d * L)`` and
``b = I_0``.

Rasterisation conventions: pixel centres at ``(x + 0.5, y + 0.5)``, edge
functions with the top-left fill rule, no backface culling, a per-pixel
z-buffer (ties keep the earlier triangle), perspective-correct barycentric
interpolation and renormalised normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ShapeError
from .mesh import Mesh
from .posecam import CameraConfig, Pose, camera_space, pose_to_transform, project_points


@dataclass
class AttributeImage:
    """Per-pixel attribute vectors, shape (H, W, C), plus a coverage mask (H, W)."""

    channels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim == 2:
            ch = ch[:, :, None]
        if ch.ndim != 3:
            raise ShapeError("channels must have shape (H, W, C)")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != ch.shape[:2]:
            raise ShapeError(f"mask shape {mask.shape} does not match image {ch.shape[:2]}")
        self.channels = ch
        self.mask = mask

    @property
    def dims(self) -> tuple[int, int]:
        return (self.channels.shape[1], self.channels.shape[0])

    @property
    def n_channels(self) -> int:
        return self.channels.shape[2]

    @classmethod
    def from_gray(cls, gray: np.ndarray, mask: np.ndarray | None = None) -> "AttributeImage":
        gray = np.asarray(gray, dtype=np.float64)
        if mask is None:
            mask = np.ones(gray.shape, dtype=bool)
        return cls(gray[:, :, None], mask)


@dataclass(frozen=True)
class Lighting:
    """Affine illumination: intensity = A @ M + b, A of shape (n, m), b of shape (n,)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        if b.shape != (A.shape[0],):
            raise ShapeError("offset b must have one entry per row of A")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ShapeError("lighting must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_components(cls, I_a: float, I_d: float, L, I_0: float = 0.0) -> "Lighting":
        L = np.asarray(L, dtype=np.float64)
        n = np.linalg.norm(L)
        if n > 0:
            L = L / n
        return cls(np.concatenate(([I_a], I_d * L))[None, :], [I_0])

    def components(self) -> dict:
        """Inverse of ``from_components`` for a single-channel 4-attribute lighting."""
        if self.A.shape != (1, 4):
            raise ShapeError("components are defined for a 1x4 lighting only")
        a = self.A[0]
        i_d = float(np.linalg.norm(a[1:]))
        L = a[1:] / i_d if i_d > 0 else np.array([0.0, 0.0, -1.0])
        return {"I_a": float(a[0]), "I_d": i_d, "L": [float(v) for v in L], "I_0": float(self.b[0])}


@njit(cache=True, nogil=True)
def _raster_kernel(sx, sy, z, attrs, tris, width, height, persp, out, mask, zbuf):
    for t in range(tris.shape[0]):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        x0, y0 = sx[i0], sy[i0]
        x1, y1 = sx[i1], sy[i1]
        x2, y2 = sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if not (area != 0.0 and math.isfinite(area)):
            continue
        if area < 0.0:
            i1, i2 = i2, i1
            x1, y1, x2, y2 = x2, y2, x1, y1
            area = -area

        # clamp in floating point first: coordinates may be huge
        xmin = int(max(0.0, math.ceil(min(x0, x1, x2) - 0.5)))
        xmax = int(min(width - 1.0, math.floor(max(x0, x1, x2) - 0.5)))
        ymin = int(max(0.0, math.ceil(min(y0, y1, y2) - 0.5)))
        ymax = int(min(height - 1.0, math.floor(max(y0, y1, y2) - 0.5)))
        if xmin > xmax or ymin > ymax:
            continue

        # top-left rule for edges a->b of a positively oriented triangle (y down)
        tl0 = (y2 - y1 == 0.0 and x2 - x1 > 0.0) or (y2 - y1 < 0.0)
        tl1 = (y0 - y2 == 0.0 and x0 - x2 > 0.0) or (y0 - y2 < 0.0)
        tl2 = (y1 - y0 == 0.0 and x1 - x0 > 0.0) or (y1 - y0 < 0.0)
        z0, z1, z2 = z[i0], z[i1], z[i2]

        for py in range(ymin, ymax + 1):
            cy = py + 0.5
            for px in range(xmin, xmax + 1):
                cx = px + 0.5
                e0 = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
                e1 = (x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)
                e2 = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)
                if e0 < 0.0 or (e0 == 0.0 and not tl0):
                    continue
                if e1 < 0.0 or (e1 == 0.0 and not tl1):
                    continue
                if e2 < 0.0 or (e2 == 0.0 and not tl2):
                    continue
                b0 = e0 / area
                b1 = e1 / area
                b2 = e2 / area
                if persp:
                    w0 = b0 / z0
                    w1 = b1 / z1
                    w2 = b2 / z2
                    s = w0 + w1 + w2
                    depth = 1.0 / s
                    w0 /= s
                    w1 /= s
                    w2 /= s
                else:
                    w0, w1, w2 = b0, b1, b2
                    depth = b0 * z0 + b1 * z1 + b2 * z2
                if not depth < zbuf[py, px]:
                    continue
                zbuf[py, px] = depth
                mask[py, px] = True
                ka = w0 * attrs[i0, 0] + w1 * attrs[i1, 0] + w2 * attrs[i2, 0]
                kd = w0 * attrs[i0, 1] + w1 * attrs[i1, 1] + w2 * attrs[i2, 1]
                nx = w0 * attrs[i0, 2] + w1 * attrs[i1, 2] + w2 * attrs[i2, 2]
                ny = w0 * attrs[i0, 3] + w1 * attrs[i1, 3] + w2 * attrs[i2, 3]
                nz = w0 * attrs[i0, 4] + w1 * attrs[i1, 4] + w2 * attrs[i2, 4]
                nn = math.sqrt(nx * nx + ny * ny + nz * nz)
                if nn > 0.0:
                    nx /= nn
                    ny /= nn
                    nz /= nn
                out[py, px, 0] = ka
                out[py, px, 1] = kd * nx
                out[py, px, 2] = kd * ny
                out[py, px, 3] = kd * nz


def rasterize_screen(screen_xy, depth, vertex_attrs, triangles, dims, perspective: bool):
    """Rasterise pre-projected geometry.

    ``screen_xy`` (V, 2) pixel coordinates, ``depth`` (V,) camera depth,
    ``vertex_attrs`` (V, 5) rows of ``(k_a, k_d, nx, ny, nz)``. Returns
    ``(channels (H, W, 4), mask (H, W))``.
    """
    width, height = dims
    out = np.zeros((height, width, 4))
    mask = np.zeros((height, width), dtype=bool)
    zbuf = np.full((height, width), np.inf)
    tris = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(tris):
        _raster_kernel(
            np.ascontiguousarray(screen_xy[:, 0], dtype=np.float64),
            np.ascontiguousarray(screen_xy[:, 1], dtype=np.float64),
            np.ascontiguousarray(depth, dtype=np.float64),
            np.ascontiguousarray(vertex_attrs, dtype=np.float64),
            tris,
            width,
            height,
            perspective,
            out,
            mask,
            zbuf,
        )
    return out, mask


def rasterize_attributes(mesh: Mesh, pose: Pose, cam: CameraConfig) -> AttributeImage:
    """Render the 4-channel attribute image of ``mesh`` seen at ``pose``."""
    xf = pose_to_transform(pose, mesh.require_meta(), cam)
    if mesh.n_vertices == 0:
        out, mask = rasterize_screen(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 5)), mesh.triangles, cam.image_dims, False)
        return AttributeImage(out, mask)
    pts = camera_space(mesh.vertices, xf, cam, pose.f)
    screen = project_points(pts, cam, pose.f)
    normals = mesh.normals @ xf.rotation.T
    attrs = np.column_stack((mesh.k_a, mesh.k_d, normals))
    out, mask = rasterize_screen(screen, pts[:, 2], attrs, mesh.triangles, cam.image_dims, not pose.orthographic)
    return AttributeImage(out, mask)


def shade(attrs: AttributeImage, light: Lighting, background: float = 0.0, clamp: bool = True) -> AttributeImage:
    """Apply ``I = A @ M + b`` at covered pixels; uncovered pixels get ``background``."""
    if attrs.n_channels != light.A.shape[1]:
        raise ShapeError(f"lighting expects {light.A.shape[1]} channels, image has {attrs.n_channels}")
    lit = attrs.channels @ light.A.T + light.b
    if clamp:
        lit = np.clip(lit, 0.0, 1.0)
    out = np.where(attrs.mask[:, :, None], lit, background)
    return AttributeImage(out, attrs.mask.copy())
