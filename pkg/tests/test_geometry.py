import numpy as np
import pytest

from tsdf4d.errors import ValidationError
from tsdf4d.geometry import (
    SceneBounds,
    TriangleMesh,
    load_mesh,
    marching_cubes,
    mesh_to_tsdf,
    sample_surface,
    save_obj,
    scene_bounds,
    winding_numbers,
)
from tsdf4d.geometry.voxelize import _TriangleIndex, point_triangle_distance_sq
from tsdf4d.synthetic import SPHERE_BBOX, icosphere, sphere_tsdf
from tsdf4d.tensors import DenseVolume

TAU = 0.05
BOUNDS = SceneBounds(SPHERE_BBOX[0], SPHERE_BBOX[1])


def closed_slab(z_top=0.0, half=4.0, depth=4.0):
    """Axis-aligned box whose top face lies at z = z_top (outward normals)."""
    lo = np.array([-half, -half, z_top - depth])
    hi = np.array([half, half, z_top])
    corners = np.array(
        [
            [lo[0], lo[1], lo[2]], [hi[0], lo[1], lo[2]],
            [hi[0], hi[1], lo[2]], [lo[0], hi[1], lo[2]],
            [lo[0], lo[1], hi[2]], [hi[0], lo[1], hi[2]],
            [hi[0], hi[1], hi[2]], [lo[0], hi[1], hi[2]],
        ]
    )
    quads = [
        (0, 3, 2, 1),  # bottom (normal -z)
        (4, 5, 6, 7),  # top (normal +z)
        (0, 1, 5, 4),
        (1, 2, 6, 5),
        (2, 3, 7, 6),
        (3, 0, 4, 7),
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.asarray(tris))


# --- primitives -------------------------------------------------------------


def test_point_triangle_distance_regions():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0]])
    c = np.array([[0.0, 1.0, 0.0]])
    cases = [
        ((0.25, 0.25, 1.0), 1.0),      # above the face
        ((-1.0, -1.0, 0.0), 2.0),      # closest to vertex a
        ((2.0, 0.0, 0.0), 1.0),        # closest to vertex b
        ((0.5, -1.0, 0.0), 1.0),       # closest to edge ab
        ((1.0, 1.0, 0.0), 0.5),        # closest to edge bc
    ]
    for p, expected_sq in cases:
        d = point_triangle_distance_sq(np.array([p]), a, b, c)
        assert d[0] == pytest.approx(expected_sq, rel=1e-12)


def test_exact_distance_matches_brute_force():
    rng = np.random.default_rng(50)
    mesh = icosphere(0.5, 2)
    points = rng.uniform(-0.7, 0.7, size=(200, 3))
    index = _TriangleIndex(mesh)
    got = index.exact(points, k=8)
    tv = mesh.vertices[mesh.triangles]
    brute = np.empty(len(points))
    for i, p in enumerate(points):
        rep = np.broadcast_to(p, (len(tv), 3))
        brute[i] = np.sqrt(
            point_triangle_distance_sq(rep, tv[:, 0], tv[:, 1], tv[:, 2]).min()
        )
    np.testing.assert_allclose(got, brute, atol=1e-12)


def test_winding_inside_outside():
    mesh = icosphere(0.5, 2)
    w = winding_numbers(np.array([[0.0, 0.0, 0.0], [0.9, 0.0, 0.0]]), mesh)
    assert w[0] == pytest.approx(1.0, abs=1e-6)
    assert w[1] == pytest.approx(0.0, abs=1e-6)


# --- voxelizer --------------------------------------------------------------


def test_sphere_tsdf_matches_analytic():
    mesh = icosphere(0.5, 4)
    res = 64
    vol = mesh_to_tsdf(mesh, BOUNDS, res, TAU, dtype=np.float64)
    analytic = sphere_tsdf(res, radius=0.5, tau=TAU)
    pitch = float(BOUNDS.extent.max()) / res
    unclamped = np.abs(analytic.data) < TAU
    err = np.abs(vol.data - analytic.data)[unclamped]
    assert err.max() <= 1.5 * pitch


def test_tsdf_exact_clamps():
    mesh = icosphere(0.5, 2)
    vol = mesh_to_tsdf(mesh, BOUNDS, 32, TAU, dtype=np.float64)
    assert vol.data[0, 0, 0] == -TAU  # far outside corner
    assert vol.data[16, 16, 16] == TAU  # deep inside


def test_plane_tsdf():
    mesh = closed_slab(z_top=0.0)
    bounds = SceneBounds((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    res = 32
    vol = mesh_to_tsdf(mesh, bounds, res, TAU, dtype=np.float64)
    zs = bounds.min[2] + (np.arange(res) + 0.5) * (1.0 / res)
    expected = np.clip(-zs, -TAU, TAU)  # inside the slab below z=0 is positive
    got = vol.data[16, 16, :]
    np.testing.assert_allclose(got, expected, atol=1e-6)


def test_tsdf_translation_equivariance():
    mesh = icosphere(0.4, 2)
    vol_a = mesh_to_tsdf(mesh, BOUNDS, 24, TAU, dtype=np.float64)
    shift = np.array([0.13, -0.21, 0.05])
    shifted = TriangleMesh(mesh.vertices + shift, mesh.triangles)
    bounds_b = SceneBounds(BOUNDS.min + shift, BOUNDS.max + shift)
    vol_b = mesh_to_tsdf(shifted, bounds_b, 24, TAU, dtype=np.float64)
    np.testing.assert_allclose(vol_a.data, vol_b.data, atol=1e-6)


def test_voxelize_empty_mesh_rejected():
    empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    with pytest.raises(ValidationError):
        mesh_to_tsdf(empty, BOUNDS, 16, TAU)


# --- marching cubes ---------------------------------------------------------


def test_marching_cubes_sphere_radii():
    res = 64
    vol = sphere_tsdf(res, radius=0.5, tau=TAU)
    mesh = marching_cubes(vol, 0.0, BOUNDS)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    pitch = float(BOUNDS.extent.max()) / res
    assert mesh.num_triangles > 100
    assert np.abs(radii - 0.5).max() <= pitch


def test_marching_cubes_constant_volume_empty():
    mesh = marching_cubes(DenseVolume(np.full((8, 8, 8), 0.3)), 0.0, BOUNDS)
    assert mesh.num_vertices == 0
    assert mesh.num_triangles == 0


def test_marching_cubes_plane_field():
    res = 32
    ax = np.linspace(-0.5, 0.5, res, endpoint=False) + 0.5 / res
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    field = np.clip(-Z, -TAU, TAU)
    bounds = SceneBounds((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    mesh = marching_cubes(DenseVolume(field), 0.0, bounds)
    assert mesh.num_triangles > 0
    assert np.abs(mesh.vertices[:, 2]).max() <= 1e-6


def test_marching_cubes_orientation_positive_inside():
    vol = sphere_tsdf(32, radius=0.5, tau=0.2)
    mesh = marching_cubes(vol, 0.0, BOUNDS)
    w = winding_numbers(np.zeros((1, 3)), mesh)
    assert w[0] == pytest.approx(1.0, abs=1e-3)


def test_sign_convention_roundtrip():
    src = icosphere(0.45, 3)
    vol = mesh_to_tsdf(src, BOUNDS, 48, 0.1, dtype=np.float64)
    recon = marching_cubes(vol, 0.0, BOUNDS)
    w_src = winding_numbers(np.zeros((1, 3)), src)[0]
    w_rec = winding_numbers(np.zeros((1, 3)), recon)[0]
    assert (w_src >= 0.5) == (w_rec >= 0.5)


def test_compress_roundtrip_mesh_identical():
    from tsdf4d import TruncationSpec, compress_scene, frame_to_dense

    vol = sphere_tsdf(16, radius=0.5, tau=TAU)
    scene = compress_scene([vol], fmt="tt", tau=TAU, bbox=SPHERE_BBOX, scalar_width=8)
    recon = frame_to_dense(scene, 0)
    direct = marching_cubes(vol, 0.0, BOUNDS)
    via = marching_cubes(DenseVolume(np.asarray(recon.data)), 0.0, BOUNDS)
    np.testing.assert_allclose(via.vertices, direct.vertices, atol=1e-9)
    np.testing.assert_array_equal(via.triangles, direct.triangles)


# --- sampling ---------------------------------------------------------------


def test_sample_single_triangle_barycentric():
    mesh = TriangleMesh(
        np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]]), np.array([[0, 1, 2]])
    )
    pts = sample_surface(mesh, 500, seed=3)
    assert np.all(pts[:, 0] >= -1e-12)
    assert np.all(pts[:, 1] >= -1e-12)
    assert np.all(pts[:, 0] + pts[:, 1] <= 1 + 1e-12)
    assert np.allclose(pts[:, 2], 0)


def test_sample_unit_square_mean():
    mesh = TriangleMesh(
        np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1, 0], [0.0, 1, 0]]),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )
    pts = sample_surface(mesh, 100_000, seed=7)
    assert np.abs(pts[:, :2].mean(axis=0) - 0.5).max() <= 0.01


def test_sample_deterministic():
    mesh = icosphere(0.5, 1)
    a = sample_surface(mesh, 1000, seed=42)
    b = sample_surface(mesh, 1000, seed=42)
    np.testing.assert_array_equal(a, b)


# --- mesh io ----------------------------------------------------------------


def test_obj_roundtrip(tmp_path):
    mesh = icosphere(0.5, 1)
    path = tmp_path / "m.obj"
    save_obj(mesh, path)
    back = load_mesh(path)
    np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-8)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)


def test_ply_ascii_load(tmp_path):
    path = tmp_path / "m.ply"
    path.write_text(
        "ply\nformat ascii 1.0\n"
        "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 2\nproperty list uchar int vertex_indices\nend_header\n"
        "0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
        "3 0 1 2\n3 0 2 3\n"
    )
    mesh = load_mesh(path)
    assert mesh.num_vertices == 4
    assert mesh.num_triangles == 2


def test_ply_binary_load(tmp_path):
    import struct

    path = tmp_path / "m.ply"
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        "element vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
    )
    verts = struct.pack("<9f", 0, 0, 0, 1, 0, 0, 0, 1, 0)
    face = struct.pack("<B3i", 3, 0, 1, 2)
    path.write_bytes(header.encode() + verts + face)
    mesh = load_mesh(path)
    assert mesh.num_vertices == 3
    assert mesh.num_triangles == 1


def test_degenerate_triangles_dropped(tmp_path):
    path = tmp_path / "d.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
        "f 1 2 3\nf 1 1 2\n"  # second face has zero area
    )
    mesh = load_mesh(path)
    assert mesh.num_triangles == 1


def test_scene_bounds_union_with_margin():
    a = icosphere(0.3, 1, center=(0.5, 0, 0))
    b = icosphere(0.3, 1, center=(-0.5, 0, 0))
    sb = scene_bounds([a, b], margin=0.1)
    assert sb.min[0] == pytest.approx(-0.9, abs=1e-9)
    assert sb.max[0] == pytest.approx(0.9, abs=1e-9)
    with pytest.raises(ValidationError):
        SceneBounds((0, 0, 0), (0, 1, 1))
