"""Triangle meshes: loading, saving, surface sampling, scene bounds.

OBJ and PLY (ascii and binary little-endian) are supported for reading; OBJ
for writing. Degenerate triangles (area <= 1e-12) are dropped on load and the
count is logged.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ValidationError

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValidationError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return triangle_areas(self.vertices, self.triangles)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            raise ValidationError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def drop_degenerate(vertices: np.ndarray, triangles: np.ndarray, label: str = "") -> TriangleMesh:
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if len(triangles):
        keep = triangle_areas(vertices, triangles) > DEGENERATE_AREA
        dropped = int(np.count_nonzero(~keep))
        if dropped:
            log.info("dropped %d degenerate triangles%s", dropped, f" from {label}" if label else "")
            triangles = triangles[keep]
    return TriangleMesh(vertices, triangles)


def _load_obj(path: Path) -> TriangleMesh:
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="ignore") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v" and len(parts) >= 4:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f" and len(parts) >= 4:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise ValidationError(f"no vertices in {path}")
    return drop_degenerate(np.asarray(verts), np.asarray(faces), str(path))


_PLY_TYPES = {
    "float": ("<f4", 4), "float32": ("<f4", 4),
    "double": ("<f8", 8), "float64": ("<f8", 8),
    "char": ("<i1", 1), "int8": ("<i1", 1),
    "uchar": ("<u1", 1), "uint8": ("<u1", 1),
    "short": ("<i2", 2), "int16": ("<i2", 2),
    "ushort": ("<u2", 2), "uint16": ("<u2", 2),
    "int": ("<i4", 4), "int32": ("<i4", 4),
    "uint": ("<u4", 4), "uint32": ("<u4", 4),
}


def _load_ply(path: Path) -> TriangleMesh:
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise ValidationError(f"{path} is not a PLY file")
        fmt = None
        elements = []  # (name, count, [(prop_name, type, list_count_type or None)])
        while True:
            line = f.readline()
            if not line:
                raise ValidationError(f"unterminated PLY header in {path}")
            words = line.decode("ascii", errors="ignore").split()
            if not words or words[0] == "comment":
                continue
            if words[0] == "format":
                fmt = words[1]
            elif words[0] == "element":
                elements.append((words[1], int(words[2]), []))
            elif words[0] == "property":
                if words[1] == "list":
                    elements[-1][2].append((words[4], words[3], words[2]))
                else:
                    elements[-1][2].append((words[2], words[1], None))
            elif words[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian"):
            raise ValidationError(f"unsupported PLY format {fmt!r}")
        verts = None
        faces = []
        for name, count, props in elements:
            if fmt == "ascii":
                rows = [f.readline().split() for _ in range(count)]
                if name == "vertex":
                    names = [p[0] for p in props]
                    ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
                    verts = np.array(
                        [[float(r[ix]), float(r[iy]), float(r[iz])] for r in rows]
                    )
                elif name == "face":
                    for r in rows:
                        n = int(r[0])
                        idx = [int(v) for v in r[1 : 1 + n]]
                        for k in range(1, n - 1):
                            faces.append([idx[0], idx[k], idx[k + 1]])
            else:
                if name == "vertex" and all(p[2] is None for p in props):
                    dt = np.dtype([(p[0], _PLY_TYPES[p[1]][0]) for p in props])
                    data = np.frombuffer(f.read(dt.itemsize * count), dtype=dt)
                    verts = np.stack(
                        [data["x"], data["y"], data["z"]], axis=1
                    ).astype(np.float64)
                elif name == "face":
                    for _ in range(count):
                        (cnt_t, idx_t) = (props[0][2], props[0][1])
                        cnt_fmt, cnt_sz = _PLY_TYPES[cnt_t]
                        idx_fmt, idx_sz = _PLY_TYPES[idx_t]
                        n = int(np.frombuffer(f.read(cnt_sz), dtype=cnt_fmt)[0])
                        idx = np.frombuffer(f.read(idx_sz * n), dtype=idx_fmt)
                        for k in range(1, n - 1):
                            faces.append([int(idx[0]), int(idx[k]), int(idx[k + 1])])
                else:
                    # skip unknown fixed-size elements
                    row = sum(_PLY_TYPES[p[1]][1] for p in props if p[2] is None)
                    f.read(row * count)
    if verts is None:
        raise ValidationError(f"no vertex element in {path}")
    return drop_degenerate(verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3), str(path))


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _load_obj(path)
    if suffix == ".ply":
        return _load_ply(path)
    raise ValidationError(f"unsupported mesh format {suffix!r} (expected .obj or .ply)")


def save_obj(mesh: TriangleMesh, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            f.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def sample_surface(mesh: TriangleMesh, n: int, seed: int = 0) -> np.ndarray:
    """Area-weighted uniform surface samples; deterministic under the seed."""
    if mesh.num_triangles == 0:
        raise ValidationError("cannot sample an empty mesh")
    areas = mesh.areas
    total = areas.sum()
    if total <= 0:
        raise ValidationError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(mesh.num_triangles, size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a = mesh.vertices[mesh.triangles[tri, 0]]
    b = mesh.vertices[mesh.triangles[tri, 1]]
    c = mesh.vertices[mesh.triangles[tri, 2]]
    return (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c


@dataclass(frozen=True)
class SceneBounds:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3)
        hi = np.asarray(self.max, dtype=np.float64).reshape(3)
        if not np.all(lo < hi):
            raise ValidationError(f"degenerate bounds {lo} .. {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    def as_array(self) -> np.ndarray:
        return np.stack([self.min, self.max])


def scene_bounds(meshes: Sequence[TriangleMesh], margin: float = 0.0) -> SceneBounds:
    """Union of all frames' bounding boxes, expanded by `margin` on each side."""
    if not meshes:
        raise ValidationError("no meshes to bound")
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for m in meshes:
        mlo, mhi = m.bounds()
        lo = np.minimum(lo, mlo)
        hi = np.maximum(hi, mhi)
    return SceneBounds(lo - margin, hi + margin)
