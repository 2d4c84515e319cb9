import numpy as np
import pytest

from tsdf4d import (
    DenseVolume,
    RangeError,
    TruncationSpec,
    frame_subindex,
    frame_to_oqtt,
    frame_to_qtt,
    qindex_to_voxel,
    voxel_to_qindex,
)
from tsdf4d.quantics import QuantLayout, build_schedule, quantized_frame_to_dense
from tsdf4d.tensors import tt_to_dense


def layout(kind, k, kt=0, shape=None):
    res = 1 << k
    shape = shape or (res, res, res, 1 << kt)
    return QuantLayout(
        kind=kind,
        bits_per_axis=k,
        time_bits=kt,
        mode_schedule=build_schedule(kind, k, kt),
        original_shape=shape,
    )


def test_schedule_interleaving():
    assert build_schedule("qtt", 2, 2) == ("x1", "y1", "z1", "t1", "x2", "y2", "z2", "t2")
    assert build_schedule("oqtt", 3, 2) == ("o1", "t1", "o2", "t2", "o3")


def test_origin_maps_to_zero():
    lay = layout("qtt", 3, 2)
    assert voxel_to_qindex(lay, 0, 0, 0, 0) == (0,) * len(lay.mode_schedule)


def test_known_bit_expansion_qtt():
    lay = layout("qtt", 3)
    # x=5 -> (1,0,1), y=3 -> (0,1,1), z=6 -> (1,1,0), most significant first
    assert voxel_to_qindex(lay, 5, 3, 6) == (1, 0, 1, 0, 1, 1, 1, 1, 0)


def test_known_octet_packing():
    lay = layout("oqtt", 3)
    assert voxel_to_qindex(lay, 5, 3, 6) == (5, 3, 6)


def test_roundtrip_exhaustive_res16():
    for kind in ("qtt", "oqtt"):
        lay = layout(kind, 4, 3)  # resolution 16, 8 frames
        mismatches = 0
        for x in range(16):
            for y in range(16):
                for z in range(16):
                    for t in (0, 3, 7):
                        idx = voxel_to_qindex(lay, x, y, z, t)
                        if qindex_to_voxel(lay, idx) != (x, y, z, t):
                            mismatches += 1
        assert mismatches == 0


def test_max_index_roundtrip():
    lay = layout("oqtt", 3, 2)
    idx = voxel_to_qindex(lay, 7, 7, 7, 3)
    assert qindex_to_voxel(lay, idx) == (7, 7, 7, 3)


def test_out_of_range_coordinates():
    lay = layout("qtt", 3)
    with pytest.raises(RangeError):
        voxel_to_qindex(lay, 8, 0, 0)
    with pytest.raises(RangeError):
        qindex_to_voxel(lay, (2,) + (0,) * 8)


def test_frame_subindex_zero():
    lay = layout("oqtt", 3, 3)
    sub = frame_subindex(lay, 0)
    assert [s for s in sub if s is not None] == [0, 0, 0]


def test_frame_subindex_bits_msb_first():
    lay = layout("oqtt", 3, 3)
    sub = frame_subindex(lay, 5)  # 5 = 0b101
    assert [sub[i] for i in lay.time_positions] == [1, 0, 1]
    assert all(sub[i] is None for i in lay.spatial_positions)


def test_frame_subindex_out_of_range():
    lay = layout("oqtt", 3, 2)
    with pytest.raises(RangeError):
        frame_subindex(lay, 4)


def test_constant_volume_rank_one():
    v = DenseVolume(np.full((8, 8, 8), 0.25))
    for make in (frame_to_qtt, frame_to_oqtt):
        t, lay = make(v, TruncationSpec(eps=0.0))
        assert set(t.ranks) == {1}


def test_lossless_roundtrip_res8():
    rng = np.random.default_rng(40)
    x = rng.random((8, 8, 8))
    for make in (frame_to_qtt, frame_to_oqtt):
        t, lay = make(DenseVolume(x), TruncationSpec(eps=0.0))
        back = quantized_frame_to_dense(t, lay)
        assert np.abs(back.data - x).max() <= 1e-10
        # element contract at a few voxels
        for p in [(0, 0, 0), (5, 3, 6), (7, 7, 7)]:
            idx = voxel_to_qindex(lay, *p)
            got = tt_to_dense(t).data[idx]
            assert got == pytest.approx(x[p], rel=1e-10, abs=1e-12)


def test_error_monotone_in_rank_cap():
    from tsdf4d.synthetic import sphere_tsdf

    v = sphere_tsdf(32, tau=0.05)
    errors = []
    for cap in (20, 60):
        t, lay = frame_to_oqtt(v, TruncationSpec(max_rank=cap))
        back = quantized_frame_to_dense(t, lay)
        errors.append(np.linalg.norm(back.data - v.data))
    assert errors[1] <= errors[0] + 1e-12


def test_qtt_oqtt_agree_lossless():
    rng = np.random.default_rng(41)
    x = rng.random((8, 8, 8))
    tq, lq = frame_to_qtt(DenseVolume(x), TruncationSpec(eps=0.0))
    to, lo = frame_to_oqtt(DenseVolume(x), TruncationSpec(eps=0.0))
    np.testing.assert_allclose(
        quantized_frame_to_dense(tq, lq).data,
        quantized_frame_to_dense(to, lo).data,
        atol=1e-10,
    )


def test_padding_fill_invariance_inside_original_region():
    rng = np.random.default_rng(42)
    x = rng.random((5, 6, 7))
    outs = []
    for fill in (0.0, 0.05, -1.0):
        t, lay = frame_to_oqtt(DenseVolume(x), TruncationSpec(eps=0.0), fill=fill)
        outs.append(quantized_frame_to_dense(t, lay).data)
        assert lay.original_shape[:3] == (5, 6, 7)
        assert outs[-1].shape == (5, 6, 7)
    np.testing.assert_allclose(outs[0], x, atol=1e-10)
    np.testing.assert_allclose(outs[1], outs[0], atol=1e-10)
    np.testing.assert_allclose(outs[2], outs[0], atol=1e-10)


def test_structural_mode_counts():
    v = DenseVolume(np.zeros((16, 16, 16)))
    tq, lq = frame_to_qtt(v, TruncationSpec(max_rank=2))
    to, lo = frame_to_oqtt(v, TruncationSpec(max_rank=2))
    assert tq.ndim == 3 * to.ndim  # octet merging collapses digit triples
    assert to.ndim == lq.bits_per_axis
