"""Synthetic scenes and meshes for tests, benchmarks, and demos.

Sign convention matches the voxelizer: positive inside the object, negative
in empty space, clamped to [-tau, tau].
"""

from __future__ import annotations

from typing import Iterator, Sequence, Tuple

import numpy as np

from .geometry.mesh import TriangleMesh
from .tensors import DenseVolume

SPHERE_BBOX = ((-0.64, -0.64, -0.64), (0.64, 0.64, 0.64))


def voxel_centers(res: int, bbox=SPHERE_BBOX) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.asarray(bbox[0], dtype=np.float64)
    hi = np.asarray(bbox[1], dtype=np.float64)
    axes = [lo[a] + (np.arange(res) + 0.5) * (hi[a] - lo[a]) / res for a in range(3)]
    return np.meshgrid(*axes, indexing="ij")


def sphere_tsdf(
    res: int,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    radius: float = 0.5,
    tau: float = 0.05,
    bbox=SPHERE_BBOX,
    dtype=np.float64,
) -> DenseVolume:
    """Analytic truncated signed distance of a sphere on a res^3 grid."""
    X, Y, Z = voxel_centers(res, bbox)
    d = radius - np.sqrt(
        (X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2
    )
    return DenseVolume(np.clip(d, -tau, tau).astype(dtype))


def translating_sphere_frames(
    res: int,
    frames: int,
    radius: float = 0.5,
    tau: float = 0.05,
    bbox=SPHERE_BBOX,
    travel: float = 0.2,
    dtype=np.float64,
) -> Iterator[DenseVolume]:
    """Sphere sliding along x by `travel` world units over the sequence."""
    for i in range(frames):
        s = 0.0 if frames == 1 else i / (frames - 1)
        cx = -travel / 2 + travel * s
        yield sphere_tsdf(res, (cx, 0.0, 0.0), radius, tau, bbox, dtype)


def linear_field_volume(
    res: int, coeffs: Sequence[float] = (0.3, 0.0, 0.0), bbox=SPHERE_BBOX, tau: float = 1e9
) -> DenseVolume:
    """Affine field a.x + b.y + c.z sampled at voxel centers (clamp optional)."""
    X, Y, Z = voxel_centers(res, bbox)
    f = coeffs[0] * X + coeffs[1] * Y + coeffs[2] * Z
    return DenseVolume(np.clip(f, -tau, tau))


def icosphere(radius: float = 0.5, subdivisions: int = 4, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron projected onto a sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        edge_mid: dict = {}
        new_faces = []
        vlist = [v for v in verts]

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in edge_mid:
                m = vlist[a] + vlist[b]
                m /= np.linalg.norm(m)
                edge_mid[key] = len(vlist)
                vlist.append(m)
            return edge_mid[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        verts = np.asarray(vlist)
        faces = np.asarray(new_faces, dtype=np.int64)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts, faces)


def translating_icosphere_meshes(
    frames: int,
    radius: float = 0.35,
    subdivisions: int = 2,
    travel: float = 0.2,
) -> list:
    out = []
    for i in range(frames):
        s = 0.0 if frames == 1 else i / (frames - 1)
        cx = -travel / 2 + travel * s
        out.append(icosphere(radius, subdivisions, center=(cx, 0.0, 0.0)))
    return out
