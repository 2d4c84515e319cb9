import csv
import json

import numpy as np
import pytest

from tsdf4d.cli import main
from tsdf4d.geometry.mesh import load_mesh
from tsdf4d.synthetic import SPHERE_BBOX, translating_sphere_frames

TAU = 0.05


@pytest.fixture()
def volume_dir(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    for i, v in enumerate(translating_sphere_frames(16, 4, tau=TAU)):
        np.save(d / f"frame_{i:03d}.npy", np.asarray(v.data, dtype=np.float32))
    return d


@pytest.fixture()
def mesh_dir(tmp_path):
    from tsdf4d.geometry.mesh import save_obj
    from tsdf4d.synthetic import translating_icosphere_meshes

    d = tmp_path / "meshes"
    d.mkdir()
    for i, m in enumerate(translating_icosphere_meshes(2, subdivisions=1)):
        save_obj(m, d / f"mesh_{i:02d}.obj")
    return d


def compress(volume_dir, out, *extra):
    return main(
        [
            "compress",
            str(volume_dir),
            "-o",
            str(out),
            "--tau",
            str(TAU),
            "--tau-units",
            "world",
            *extra,
        ]
    )


def test_compress_payload_bytes_match_report(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    rc = compress(volume_dir, out, "--format", "oqtt", "--max-rank-spatial", "40",
                  "--max-rank-time", "40")
    assert rc == 0
    text = capsys.readouterr().out
    assert out.exists()
    params = int(text.split("parameters ")[1].split()[0])
    payload = int(text.split("payload ")[1].split()[0])
    assert payload == params * 4
    # trailer: header + payload + 4-byte checksum
    assert out.stat().st_size > payload


def test_compress_constant_scene_rank1_ratio(tmp_path, capsys):
    d = tmp_path / "const"
    d.mkdir()
    for i in range(2):
        np.save(d / f"f{i}.npy", np.full((8, 8, 8), 0.02, dtype=np.float32))
    out = tmp_path / "const.t4dt"
    rc = main(
        ["compress", str(d), "-o", str(out), "--format", "tt", "--max-rank", "1",
         "--tau", str(TAU), "--tau-units", "world"]
    )
    assert rc == 0
    text = capsys.readouterr().out
    params = int(text.split("parameters ")[1].split()[0])
    # rank-1 train over (8, 8, 8, 2): sum of r*I*r with all ranks 1
    assert params == 8 + 8 + 8 + 2
    ratio = float(text.split("compression ratio ")[1].split(":")[0])
    assert ratio == pytest.approx(8 * 8 * 8 * 2 / params, rel=1e-3)


def test_extract_roundtrip_lossless(volume_dir, tmp_path):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out, "--format", "tt", "--f64") == 0
    dest = tmp_path / "frame1.npy"
    rc = main(["extract", str(out), "-i", "1", "-o", str(dest)])
    assert rc == 0
    got = np.load(dest)
    ref = np.load(volume_dir / "frame_001.npy")
    assert np.abs(got - ref).max() <= 1e-10


def test_extract_out_of_range_exit_code(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out) == 0
    rc = main(["extract", str(out), "-i", "4", "-o", str(tmp_path / "x.npy")])
    assert rc == 2
    assert "range" in capsys.readouterr().err


def test_extract_mesh_obj_roundtrip(volume_dir, tmp_path):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out) == 0
    dest = tmp_path / "frame0.obj"
    rc = main(["extract", str(out), "-i", "0", "-o", str(dest), "--mesh"])
    assert rc == 0
    mesh = load_mesh(dest)
    assert mesh.num_triangles > 0


def test_query_consistency_and_clamp(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out, "--format", "tt", "--f64") == 0
    # the synthetic frames live on the unit bbox by default here
    rc = main(["query", str(out), "-x", "0.5", "-y", "0.5", "-z", "0.5", "-t", "0"])
    assert rc == 0
    center_val = float(capsys.readouterr().out.split("value ")[1])
    ref = np.load(volume_dir / "frame_000.npy")
    assert center_val == pytest.approx(ref[8, 8, 8], abs=1e-6)
    # far corner lies in clamped empty space
    rc = main(["query", str(out), "-x", "0.01", "-y", "0.01", "-z", "0.01", "-t", "0"])
    assert rc == 0
    corner_val = float(capsys.readouterr().out.split("value ")[1])
    assert corner_val == pytest.approx(-TAU, abs=1e-6)


def test_query_outside_bbox_exit_code(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out) == 0
    rc = main(["query", str(out), "-x", "5", "-y", "0", "-z", "0", "-t", "0"])
    assert rc == 2


def test_missing_scene_exit_code(tmp_path, capsys):
    rc = main(["info", str(tmp_path / "nope.t4dt")])
    assert rc == 3
    assert "io" in capsys.readouterr().err


def test_metrics_self_comparison_zeros(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out, "--format", "tt", "--f64") == 0
    json_path = tmp_path / "report.json"
    rc = main(
        ["metrics", str(out), "--reference", str(volume_dir), "--samples", "400",
         "--json", str(json_path)]
    )
    assert rc == 0
    report = json.loads(json_path.read_text())
    assert report["l2"] <= 1e-5
    assert report["iou"] == 1.0
    assert report["hausdorff"] <= 1e-6
    assert report["chamfer"] <= 1e-12
    assert report["frames_evaluated"] == [0, 2, 3]


def test_metrics_json_matches_schema(volume_dir, tmp_path, capsys):
    import jsonschema

    from tsdf4d.metrics import REPORT_SCHEMA

    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out, "--format", "tt") == 0
    capsys.readouterr()
    rc = main(["metrics", str(out), "--reference", str(volume_dir), "--samples", "200"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    core = {k: payload[k] for k in REPORT_SCHEMA["properties"] if k in payload}
    jsonschema.validate(core, REPORT_SCHEMA)


def test_mesh_input_compress(mesh_dir, tmp_path, capsys):
    out = tmp_path / "mesh_scene.t4dt"
    rc = main(
        ["compress", str(mesh_dir), "-o", str(out), "--format", "oqtt",
         "--resolution", "16", "--max-rank", "30", "--tau", "0.05"]
    )
    assert rc == 0, capsys.readouterr().err
    capsys.readouterr()
    rc = main(["info", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["resolution"] == [16, 16, 16]
    assert info["true_frame_count"] == 2
    # tau normalized against the pre-margin scene extent: spheres of radius 0.35
    # translating 0.2 along x span 0.9 world units
    assert info["tau"] == pytest.approx(0.05 * 0.9, rel=1e-9)


def test_info_fields(volume_dir, tmp_path, capsys):
    out = tmp_path / "scene.t4dt"
    assert compress(volume_dir, out, "--format", "qtt") == 0
    capsys.readouterr()
    rc = main(["info", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["format"] == "qtt"
    assert info["layout"]["bit_order"] == "msb-first"
    assert info["true_frame_count"] == 4


def test_bench_row_count_and_full_rank_zero(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = main(
        ["bench", "-o", str(out), "--resolution", "8", "--frames", "2",
         "--formats", "tt,oqtt", "--ranks", "2,512", "--samples", "100"]
    )
    assert rc == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 2
    by_key = {(r["format"], int(r["max_rank"])): r for r in rows}
    # full-rank sweep point reconstructs exactly
    assert float(by_key[("tt", 512)]["frame_stage_rel_error"]) <= 1e-10
    # nested caps: per-frame stage error is nonincreasing in the cap
    for fmt in ("tt", "oqtt"):
        assert (
            float(by_key[(fmt, 512)]["frame_stage_rel_error"])
            <= float(by_key[(fmt, 2)]["frame_stage_rel_error"]) + 1e-12
        )


def test_threads_bit_identical_scene_files(volume_dir, tmp_path):
    a = tmp_path / "a.t4dt"
    b = tmp_path / "b.t4dt"
    assert compress(volume_dir, a, "--format", "oqtt", "--threads", "1") == 0
    assert compress(volume_dir, b, "--format", "oqtt", "--threads", "8") == 0
    assert a.read_bytes() == b.read_bytes()
