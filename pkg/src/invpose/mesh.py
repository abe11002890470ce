"""Triangle meshes with per-vertex reflectance and wheel registration anchors.

Geometry comes from a small OBJ subset (``v``, ``vn``, ``f``); everything else
(reflectances, wheel centres, axle direction) lives in a JSON sidecar named
``<stem>.meta.json`` next to the OBJ file::

    {"rear_wheel_center": [x, y, z], "front_wheel_center": [x, y, z],
     "axle_dir": [x, y, z], "k_a": 0.3, "k_d": 0.7}

``k_a``/``k_d`` may be scalars or per-vertex lists and are optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import MeshSyntaxError, MeshValidationError, MetadataError

NORMAL_TOL = 1e-6


@dataclass(frozen=True)
class ReflectanceDefaults:
    k_a: float = 0.3
    k_d: float = 0.7


@dataclass(frozen=True)
class RegistrationMeta:
    rear_wheel_center: np.ndarray
    front_wheel_center: np.ndarray
    axle_dir: np.ndarray

    def __post_init__(self):
        for name in ("rear_wheel_center", "front_wheel_center", "axle_dir"):
            arr = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise MetadataError(f"{name} must be a finite 3-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if abs(np.linalg.norm(self.axle_dir) - 1.0) > NORMAL_TOL:
            raise MetadataError("axle_dir must be a unit vector")
        w = self.wheelbase
        wn = np.linalg.norm(w)
        if wn <= 0.0:
            raise MetadataError("front and rear wheel centres coincide")
        if abs(float(self.axle_dir @ w) / wn) >= 0.99:
            raise MetadataError("axle direction is (nearly) parallel to the wheelbase")

    @property
    def wheelbase(self) -> np.ndarray:
        return self.front_wheel_center - self.rear_wheel_center

    def to_json(self) -> dict:
        return {
            "rear_wheel_center": [float(v) for v in self.rear_wheel_center],
            "front_wheel_center": [float(v) for v in self.front_wheel_center],
            "axle_dir": [float(v) for v in self.axle_dir],
        }


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh. Arrays are read-only after construction."""

    vertices: np.ndarray  # (V, 3) float64
    normals: np.ndarray  # (V, 3) unit
    triangles: np.ndarray  # (T, 3) int64
    k_a: np.ndarray  # (V,)
    k_d: np.ndarray  # (V,)
    metadata: Optional[RegistrationMeta] = field(default=None)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        n = np.ascontiguousarray(self.normals, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        ka = np.ascontiguousarray(self.k_a, dtype=np.float64).reshape(-1)
        kd = np.ascontiguousarray(self.k_d, dtype=np.float64).reshape(-1)
        nv = len(v)
        if n.shape != v.shape:
            raise MeshValidationError("need exactly one normal per vertex")
        if ka.shape != (nv,) or kd.shape != (nv,):
            raise MeshValidationError("need exactly one k_a and k_d per vertex")
        if not np.all(np.isfinite(v)):
            raise MeshValidationError("non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= nv):
            raise MeshValidationError("triangle index out of range")
        if nv and np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) > NORMAL_TOL:
            raise MeshValidationError("normals must have unit length")
        for name, arr in (("k_a", ka), ("k_d", kd)):
            if nv and (np.min(arr) < 0.0 or np.max(arr) > 1.0 or not np.all(np.isfinite(arr))):
                raise MeshValidationError(f"{name} values must lie in [0, 1]")
        for name, arr in (("vertices", v), ("normals", n), ("triangles", t), ("k_a", ka), ("k_d", kd)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def require_meta(self) -> RegistrationMeta:
        if self.metadata is None:
            raise MetadataError("mesh has no registration metadata")
        return self.metadata


def area_weighted_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Per-vertex normals as the normalised sum of incident face normals.

    Unnormalised cross products weight each face by twice its area. Vertices
    with no (or cancelling) incident faces get ``(0, 0, 1)``.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    acc = np.zeros_like(vertices)
    if len(triangles):
        p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
        fn = np.cross(p1 - p0, p2 - p0)
        for k in range(3):
            np.add.at(acc, triangles[:, k], fn)
    norm = np.linalg.norm(acc, axis=1)
    out = np.zeros_like(acc)
    ok = norm > 1e-300
    out[ok] = acc[ok] / norm[ok, None]
    out[~ok] = (0.0, 0.0, 1.0)
    return out


def _parse_index(token: str, count: int, lineno: int) -> int:
    try:
        idx = int(token)
    except ValueError:
        raise MeshSyntaxError(f"bad index {token!r}", lineno) from None
    if idx == 0:
        raise MeshSyntaxError("OBJ indices are 1-based; got 0", lineno)
    # negative indices are relative to the elements declared so far
    return idx - 1 if idx > 0 else count + idx


def parse_obj(text: str):
    """Parse OBJ text into ``(vertices, vn, triangles, corner_normals)``.

    ``corner_normals`` has the same shape as ``triangles`` and holds the
    ``vn`` index of every triangle corner, or -1 when the face gave none.
    Polygons are fan-triangulated. Unknown statements are ignored.
    """
    verts: list[list[float]] = []
    vns: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    corner_n: list[tuple[int, int, int]] = []
    face_lines: list[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        if key in ("v", "vn"):
            if len(args) < 3:
                raise MeshSyntaxError(f"'{key}' needs 3 coordinates", lineno)
            try:
                xyz = [float(a) for a in args[:3]]
            except ValueError:
                raise MeshSyntaxError(f"bad number in '{key}' statement", lineno) from None
            (verts if key == "v" else vns).append(xyz)
        elif key == "f":
            if len(args) < 3:
                raise MeshSyntaxError("face needs at least 3 vertices", lineno)
            vi, ni = [], []
            for corner in args:
                fields = corner.split("/")
                vi.append(_parse_index(fields[0], len(verts), lineno))
                if len(fields) >= 3 and fields[2]:
                    ni.append(_parse_index(fields[2], len(vns), lineno))
                else:
                    ni.append(-1)
            for k in range(1, len(vi) - 1):
                tris.append((vi[0], vi[k], vi[k + 1]))
                corner_n.append((ni[0], ni[k], ni[k + 1]))
                face_lines.append(lineno)

    nv, nn = len(verts), len(vns)
    for tri, cn, lineno in zip(tris, corner_n, face_lines):
        if any(i < 0 or i >= nv for i in tri):
            raise MeshValidationError(f"line {lineno}: face references a vertex outside 1..{nv}")
        if any(i >= nn or (i < -1) for i in cn):
            raise MeshValidationError(f"line {lineno}: face references a normal outside 1..{nn}")

    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    normals = np.array(vns, dtype=np.float64).reshape(-1, 3)
    triangles = np.array(tris, dtype=np.int64).reshape(-1, 3)
    corners = np.array(corner_n, dtype=np.int64).reshape(-1, 3)
    return vertices, normals, triangles, corners


def _vertex_normals(vertices, vns, triangles, corners) -> np.ndarray:
    computed = area_weighted_normals(vertices, triangles)
    if len(vns) == 0:
        return computed
    vn_unit = vns / np.maximum(np.linalg.norm(vns, axis=1, keepdims=True), 1e-300)
    if corners.size and np.any(corners >= 0):
        acc = np.zeros_like(vertices)
        hit = np.zeros(len(vertices), dtype=bool)
        sel = corners >= 0
        np.add.at(acc, triangles[sel], vn_unit[corners[sel]])
        hit[triangles[sel]] = True
        norm = np.linalg.norm(acc, axis=1)
        use = hit & (norm > 1e-300)
        out = computed.copy()
        out[use] = acc[use] / norm[use, None]
        return out
    if len(vns) == len(vertices):
        return vn_unit
    return computed


def _reflectance(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise MetadataError(f"{name} must be a scalar or a list of {n} values")
    return arr


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta.json")


def load_mesh(
    path: str | Path,
    defaults: ReflectanceDefaults = ReflectanceDefaults(),
    require_meta: bool = False,
) -> Mesh:
    """Load an OBJ mesh and its optional ``.meta.json`` sidecar."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    vertices, vns, triangles, corners = parse_obj(text)
    normals = _vertex_normals(vertices, vns, triangles, corners)

    meta = None
    k_a = np.full(len(vertices), defaults.k_a)
    k_d = np.full(len(vertices), defaults.k_d)
    side = sidecar_path(path)
    if side.exists():
        try:
            doc = json.loads(side.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MetadataError(f"{side}: {exc}") from None
        if "k_a" in doc:
            k_a = _reflectance(doc["k_a"], len(vertices), "k_a")
        if "k_d" in doc:
            k_d = _reflectance(doc["k_d"], len(vertices), "k_d")
        keys = ("rear_wheel_center", "front_wheel_center", "axle_dir")
        if all(k in doc for k in keys):
            meta = RegistrationMeta(*(doc[k] for k in keys))
        elif any(k in doc for k in keys):
            raise MetadataError(f"{side}: incomplete registration metadata")
    if require_meta and meta is None:
        raise MetadataError(f"no registration metadata found for {path} (expected {side})")
    return Mesh(vertices, normals, triangles, k_a, k_d, meta)


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    """Write ``mesh`` as OBJ (v/vn/f) plus a sidecar with reflectances and metadata."""
    path = Path(path)
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"vn {x!r} {y!r} {z!r}" for x, y, z in mesh.normals.tolist()]
    lines += [f"f {a}//{a} {b}//{b} {c}//{c}" for a, b, c in (mesh.triangles + 1).tolist()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    doc: dict = {}
    if mesh.metadata is not None:
        doc.update(mesh.metadata.to_json())
    doc["k_a"] = _compact(mesh.k_a)
    doc["k_d"] = _compact(mesh.k_d)
    sidecar_path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _compact(values: np.ndarray):
    if len(values) and np.all(values == values[0]):
        return float(values[0])
    return [float(v) for v in values]


def make_mesh(
    vertices: Sequence,
    triangles: Sequence,
    k_a=0.3,
    k_d=0.7,
    metadata: Optional[RegistrationMeta] = None,
    normals: Optional[Sequence] = None,
) -> Mesh:
    """Build a Mesh in memory, computing area-weighted normals when none are given."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if t.size and (t.min() < 0 or t.max() >= len(v)):
        raise MeshValidationError("triangle index out of range")
    n = area_weighted_normals(v, t) if normals is None else np.asarray(normals, dtype=np.float64)
    return Mesh(v, n, t, _reflectance(k_a, len(v), "k_a"), _reflectance(k_d, len(v), "k_d"), metadata)
