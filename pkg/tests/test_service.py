import numpy as np
import pytest
from fastapi.testclient import TestClient

from tsdf4d.service.app import create_app
from tsdf4d.synthetic import SPHERE_BBOX, translating_sphere_frames

TAU = 0.05


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture()
def volume_dir(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    for i, v in enumerate(translating_sphere_frames(16, 4, tau=TAU)):
        np.save(d / f"frame_{i:03d}.npy", np.asarray(v.data, dtype=np.float32))
    return d


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_compress_extract_query_flow(client, volume_dir, tmp_path):
    scene_path = tmp_path / "scene.t4dt"
    r = client.post(
        "/compress",
        json={
            "input_dir": str(volume_dir),
            "output_path": str(scene_path),
            "format": "oqtt",
            "tau": TAU,
            "tau_units": "world",
            "bbox": [list(SPHERE_BBOX[0]), list(SPHERE_BBOX[1])],
        },
    )
    assert r.status_code == 200, r.text
    body = r.json()
    assert body["true_frame_count"] == 4
    assert body["payload_bytes"] == body["parameter_count"] * 4
    assert scene_path.exists()

    out_npy = tmp_path / "frame2.npy"
    r = client.post(
        "/extract",
        json={"scene_path": str(scene_path), "frame": 2, "output_path": str(out_npy)},
    )
    assert r.status_code == 200, r.text
    assert np.load(out_npy).shape == (16, 16, 16)

    r = client.post(
        "/query",
        json={"scene_path": str(scene_path), "x": 0.0, "y": 0.0, "z": 0.0, "t": 0},
    )
    assert r.status_code == 200
    assert r.json()["value"] == pytest.approx(TAU, abs=1e-3)

    r = client.post("/info", json={"scene_path": str(scene_path)})
    assert r.status_code == 200
    info = r.json()
    assert info["format"] == "oqtt"
    assert info["layout"]["bit_order"] == "msb-first"


def test_missing_scene_maps_to_404(client, tmp_path):
    r = client.post(
        "/query",
        json={"scene_path": str(tmp_path / "no.t4dt"), "x": 0, "y": 0, "z": 0, "t": 0},
    )
    assert r.status_code == 404
    assert r.json()["code"] == "io"


def test_frame_out_of_range_maps_to_416(client, volume_dir, tmp_path):
    scene_path = tmp_path / "scene.t4dt"
    client.post(
        "/compress",
        json={
            "input_dir": str(volume_dir),
            "output_path": str(scene_path),
            "format": "tt",
            "max_rank_spatial": 8,
            "tau": TAU,
        },
    )
    r = client.post(
        "/extract",
        json={"scene_path": str(scene_path), "frame": 4, "output_path": str(tmp_path / "x.npy")},
    )
    assert r.status_code == 416
    assert r.json()["code"] == "range"


def test_bad_payload_maps_to_422(client):
    r = client.post("/compress", json={"input_dir": "x"})
    assert r.status_code == 422


def test_metrics_self_comparison(client, volume_dir, tmp_path):
    scene_path = tmp_path / "scene.t4dt"
    client.post(
        "/compress",
        json={
            "input_dir": str(volume_dir),
            "output_path": str(scene_path),
            "format": "tt",
            "tau": TAU,
            "tau_units": "world",
            "scalar_width": 8,
        },
    )
    r = client.post(
        "/metrics",
        json={
            "scene_path": str(scene_path),
            "reference_dir": str(volume_dir),
            "samples": 500,
        },
    )
    assert r.status_code == 200, r.text
    body = r.json()
    assert body["frames_evaluated"] == [0, 2, 3]
    assert body["l2"] <= 1e-5
    assert body["iou"] == 1.0
    assert body["hausdorff"] <= 1e-5
    assert body["chamfer"] <= 1e-8
