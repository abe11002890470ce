"""Procedural test meshes with registration metadata.

Model axes: x forward (rear -> front wheel), y up, z along the rear axle.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, RegistrationMeta, area_weighted_normals

_DEFAULT_META = RegistrationMeta((-1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0))


def _merge(parts) -> Mesh:
    verts, norms, tris, ka, kd = [], [], [], [], []
    offset = 0
    for v, n, t, a, d in parts:
        verts.append(v)
        norms.append(n)
        tris.append(t + offset)
        ka.append(np.full(len(v), a))
        kd.append(np.full(len(v), d))
        offset += len(v)
    return (np.concatenate(verts), np.concatenate(norms), np.concatenate(tris), np.concatenate(ka), np.concatenate(kd))


def uv_sphere(radius: float = 1.0, n_lat: int = 16, n_lon: int = 32, center=(0.0, 0.0, 0.0), k_a=0.3, k_d=0.7,
              metadata: RegistrationMeta | None = _DEFAULT_META) -> Mesh:
    theta = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]
    phi = np.linspace(0.0, 2 * np.pi, n_lon, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ring = np.stack((np.sin(tt) * np.cos(pp), np.cos(tt), np.sin(tt) * np.sin(pp)), axis=-1).reshape(-1, 3)
    unit = np.vstack(([0.0, 1.0, 0.0], ring, [0.0, -1.0, 0.0]))
    top, bottom = 0, len(unit) - 1

    def idx(i, j):
        return 1 + i * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((top, idx(0, j + 1), idx(0, j)))
        tris.append((bottom, idx(n_lat - 2, j), idx(n_lat - 2, j + 1)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b, c, d = idx(i, j), idx(i, j + 1), idx(i + 1, j), idx(i + 1, j + 1)
            tris += [(a, b, c), (b, d, c)]
    verts = radius * unit + np.asarray(center, dtype=np.float64)
    return Mesh(verts, unit, np.array(tris), np.full(len(unit), k_a), np.full(len(unit), k_d), metadata)


def torus(major: float = 1.0, minor: float = 0.35, n_major: int = 32, n_minor: int = 16, k_a=0.3, k_d=0.7,
          metadata: RegistrationMeta | None = _DEFAULT_META) -> Mesh:
    """Torus around the y axis; reflectance varies around the tube so no channel is constant."""
    u = np.linspace(0.0, 2 * np.pi, n_major, endpoint=False)
    v = np.linspace(0.0, 2 * np.pi, n_minor, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    normals = np.stack((np.cos(vv) * np.cos(uu), np.sin(vv), np.cos(vv) * np.sin(uu)), axis=-1).reshape(-1, 3)
    centre = np.stack((major * np.cos(uu), np.zeros_like(uu), major * np.sin(uu)), axis=-1).reshape(-1, 3)
    verts = centre + minor * normals
    tris = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = i * n_minor + (j + 1) % n_minor
            d = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            tris += [(a, b, c), (b, d, c)]
    stripe = 0.5 + 0.5 * np.cos(uu).reshape(-1)
    ka = np.full(len(verts), k_a) * (0.5 + 0.5 * stripe)
    kd = np.full(len(verts), k_d) * (0.75 + 0.25 * stripe)
    return Mesh(verts, normals, np.array(tris), ka, kd, metadata)


def _signed_pow(x, e):
    return np.sign(x) * np.abs(x) ** e


def _rounded_box(center, half, exponent, k_a, k_d, n_lat=16, n_lon=32):
    """Superellipsoid: a box with rounded edges and smooth (area-weighted) normals.

    ``exponent`` in (0, 1]: 1 gives an ellipsoid, small values approach a box.
    """
    eta = np.linspace(-np.pi / 2, np.pi / 2, n_lat + 1)[1:-1]
    omega = np.linspace(-np.pi, np.pi, n_lon, endpoint=False)
    ee, oo = np.meshgrid(eta, omega, indexing="ij")
    ce = _signed_pow(np.cos(ee), exponent)
    ring = np.stack((
        half[0] * ce * _signed_pow(np.cos(oo), exponent),
        half[1] * _signed_pow(np.sin(ee), exponent),
        half[2] * ce * _signed_pow(np.sin(oo), exponent),
    ), axis=-1).reshape(-1, 3)
    verts = np.vstack(([0.0, -half[1], 0.0], ring, [0.0, half[1], 0.0])) + np.asarray(center, dtype=np.float64)
    bottom, top = 0, len(verts) - 1

    def idx(i, j):
        return 1 + i * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((bottom, idx(0, j), idx(0, j + 1)))
        tris.append((top, idx(n_lat - 2, j + 1), idx(n_lat - 2, j)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b, c, d = idx(i, j), idx(i, j + 1), idx(i + 1, j), idx(i + 1, j + 1)
            tris += [(a, c, b), (b, c, d)]
    tris = np.array(tris)
    return verts, area_weighted_normals(verts, tris), tris, k_a, k_d


def _wheel(center, radius, width, segments, k_a, k_d):
    """Cylinder along z with smooth sides and flat caps."""
    cx, cy, cz = center
    ang = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    ring = np.column_stack((np.cos(ang), np.sin(ang), np.zeros(segments)))
    verts, norms, tris = [], [], []
    for dz in (-width / 2, width / 2):
        verts.append(np.asarray(center) + radius * ring + [0.0, 0.0, dz])
        norms.append(ring)
    side = segments * 2
    for i in range(segments):
        j = (i + 1) % segments
        tris += [(i, j, segments + i), (j, segments + j, segments + i)]
    for k, dz in enumerate((-width / 2, width / 2)):
        base = side + k * (segments + 1)
        sign = -1.0 if dz < 0 else 1.0
        verts.append(np.vstack(([cx, cy, cz + dz], np.asarray(center) + radius * ring + [0.0, 0.0, dz])))
        norms.append(np.tile([0.0, 0.0, sign], (segments + 1, 1)))
        for i in range(segments):
            j = (i + 1) % segments
            tris.append((base, base + 1 + i, base + 1 + j))
    return np.vstack(verts), np.vstack(norms), np.array(tris), k_a, k_d


def box_car(length: float = 4.0, width: float = 1.8, wheel_radius: float = 0.35, wheelbase: float = 2.6,
            segments: int = 16) -> Mesh:
    """Toy car: rounded body and cabin plus four cylinders, with distinct reflectances."""
    half_w = width / 2
    xr, xf = -wheelbase / 2, wheelbase / 2
    yw = wheel_radius
    parts = [
        _rounded_box((0.0, yw + 0.3, 0.0), (length / 2, 0.33, half_w), 0.35, 0.3, 0.7),
        _rounded_box((-length * 0.05, yw + 0.75, 0.0), (length * 0.25, 0.3, half_w * 0.85), 0.4, 0.12, 0.35),
    ]
    for x in (xr, xf):
        for z in (-half_w, half_w):
            parts.append(_wheel((x, yw, z), wheel_radius, 0.3, segments, 0.05, 0.2))
    v, n, t, ka, kd = _merge(parts)
    meta = RegistrationMeta((xr, yw, 0.0), (xf, yw, 0.0), (0.0, 0.0, 1.0))
    return Mesh(v, n, t, ka, kd, meta)


def cube(size: float = 1.0) -> Mesh:
    """Unit cube with 8 shared vertices and computed smooth normals."""
    s = size / 2
    v = np.array([[x, y, z] for x in (-s, s) for y in (-s, s) for z in (-s, s)])
    t = np.array([
        (0, 1, 3), (0, 3, 2), (4, 6, 7), (4, 7, 5),
        (0, 4, 5), (0, 5, 1), (2, 3, 7), (2, 7, 6),
        (0, 2, 6), (0, 6, 4), (1, 5, 7), (1, 7, 3),
    ])
    meta = RegistrationMeta((-s, 0.0, 0.0), (s, 0.0, 0.0), (0.0, 0.0, 1.0))
    return Mesh(v, area_weighted_normals(v, t), t, np.full(8, 0.3), np.full(8, 0.7), meta)


SHAPES = {"car": box_car, "sphere": uv_sphere, "torus": torus, "cube": cube}
