import numpy as np
import pytest

from tsdf4d import DenseVolume, ValidationError, chamfer, hausdorff, iou, l2
from tsdf4d.metrics import MetricReport, REPORT_SCHEMA, write_report_csv


def brute_hausdorff(a, b):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def brute_chamfer(a, b, normalized=True):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2) ** 2
    s_ab, s_ba = d.min(axis=1).sum(), d.min(axis=0).sum()
    if normalized:
        return s_ab / len(a) + s_ba / len(b)
    return s_ab + s_ba


def test_l2_zero_for_identical():
    v = DenseVolume(np.random.default_rng(0).random((4, 4)))
    assert l2(v, v) == 0.0


def test_l2_single_entry():
    a = np.zeros((3, 3))
    b = a.copy()
    b[1, 2] = -3.0
    assert l2(DenseVolume(a), DenseVolume(b)) == pytest.approx(3.0)


def test_l2_matches_direct_sum():
    rng = np.random.default_rng(1)
    a, b = rng.random((8, 8, 8)), rng.random((8, 8, 8))
    direct = np.sqrt(((a - b) ** 2).sum())
    assert l2(DenseVolume(a), DenseVolume(b)) == pytest.approx(direct, rel=1e-12)


def test_l2_shape_mismatch():
    with pytest.raises(ValidationError):
        l2(DenseVolume(np.ones((2, 2))), DenseVolume(np.ones((3, 3))))


def test_iou_identical():
    v = DenseVolume(np.random.default_rng(2).standard_normal((5, 5, 5)))
    assert iou(v, v) == 1.0


def test_iou_disjoint():
    a = np.full((4, 4), -1.0)
    b = np.full((4, 4), -1.0)
    a[0, 0] = 1.0
    b[3, 3] = 1.0
    assert iou(DenseVolume(a), DenseVolume(b)) == 0.0


def test_iou_half_overlap_boxes():
    # equal-volume boxes overlapping on half their extent: |A&B|=2, |A|B|=6 -> 1/3
    a = np.full((8, 1, 1), -1.0)
    b = np.full((8, 1, 1), -1.0)
    a[0:4] = 1.0
    b[2:6] = 1.0
    assert iou(DenseVolume(a), DenseVolume(b)) == pytest.approx(1.0 / 3.0)


def test_iou_both_empty():
    v = DenseVolume(np.full((3, 3), -1.0))
    assert iou(v, v) == 1.0


def test_hausdorff_line_points():
    assert hausdorff(np.array([[0.0]]), np.array([[1.0]])) == 1.0


def test_hausdorff_asymmetry_resolved_by_max():
    a = np.array([[0.0], [1.0]])
    b = np.array([[0.0], [1.0], [6.0]])
    assert hausdorff(a, b) == 5.0
    assert hausdorff(b, a) == 5.0


def test_hausdorff_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.random((rng.integers(5, 200), 3))
        b = rng.random((rng.integers(5, 200), 3))
        assert hausdorff(a, b) == pytest.approx(brute_hausdorff(a, b), abs=1e-12)


def test_hausdorff_triangle_inequality():
    rng = np.random.default_rng(4)
    a, b, c = (rng.random((50, 3)) for _ in range(3))
    assert hausdorff(a, c) <= hausdorff(a, b) + hausdorff(b, c) + 1e-12


def test_chamfer_identical_zero():
    pts = np.random.default_rng(5).random((40, 3))
    assert chamfer(pts, pts) == 0.0


def test_chamfer_two_points_line():
    a = np.array([[0.0]])
    b = np.array([[2.0]])
    assert chamfer(a, b, normalized=False) == pytest.approx(8.0)
    assert chamfer(a, b, normalized=True) == pytest.approx(8.0)  # n=1 per side


def test_chamfer_matches_brute_force():
    rng = np.random.default_rng(6)
    a = rng.random((100, 3))
    b = rng.random((100, 3))
    assert chamfer(a, b) == pytest.approx(brute_chamfer(a, b), abs=1e-10)
    assert chamfer(a, b, normalized=False) == pytest.approx(
        brute_chamfer(a, b, normalized=False), abs=1e-10
    )


def test_symmetry():
    rng = np.random.default_rng(7)
    a = rng.random((30, 3))
    b = rng.random((50, 3))
    assert hausdorff(a, b) == hausdorff(b, a)
    assert chamfer(a, b) == chamfer(b, a)


def test_empty_sets_rejected():
    with pytest.raises(ValidationError):
        hausdorff(np.zeros((0, 3)), np.ones((2, 3)))
    with pytest.raises(ValidationError):
        chamfer(np.ones((2, 3)), np.zeros((0, 3)))


def test_report_schema_and_json():
    import jsonschema

    rep = MetricReport(
        l2=1.5, iou=0.8, hausdorff=0.01, chamfer=1e-5, frames_evaluated=[0, 7, 15]
    )
    payload = rep.to_dict()
    jsonschema.validate(payload, REPORT_SCHEMA)
    assert "msdm2" not in payload  # perceptual metric intentionally absent


def test_report_validates_ranges():
    with pytest.raises(ValidationError):
        MetricReport(l2=0, iou=1.2, hausdorff=0, chamfer=0, frames_evaluated=[0])


def test_csv_writer(tmp_path):
    rows = [
        {"format": "tt", "rank": 10, "l2": 0.5},
        {"format": "tt", "rank": 20, "l2": 0.3},
    ]
    path = tmp_path / "rows.csv"
    write_report_csv(rows, path)
    text = path.read_text().strip().splitlines()
    assert text[0] == "format,rank,l2"
    assert len(text) == 3
