"""End-to-end scene compression and compressed-domain queries.

Frames are compressed one at a time (at most two dense frames are ever alive),
a time mode is spliced into each compressed frame, and the per-frame tensors
are merged pairwise in a level-synchronous binary tree: concatenate along the
time mode, then truncate ranks back down. Rank caps during merging follow the
two-cap scheme: edges touching a time core are capped at the time cap, all
others at max(spatial cap, time cap).

Queries never densify anything: a point lookup maps the world position to its
nearest voxel center and evaluates a single compressed element, so the cost is
independent of the query location.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .decompose import (
    TruncationSpec,
    insert_time_mode,
    to_tt_tucker,
    tt_concat,
    tt_round,
    tt_slice,
    tt_svd,
    tucker_hosvd,
)
from .errors import BudgetError, RangeError, ValidationError
from .quantics import (
    QuantLayout,
    frame_subindex,
    frame_to_oqtt,
    frame_to_qtt,
    quantized_frame_to_dense,
    voxel_to_qindex,
)
from .tensors import (
    DenseVolume,
    TTTensor,
    TTTuckerTensor,
    TuckerTensor,
    check_budget,
    storage_report,
    tt_element,
    tt_to_dense,
    tttucker_element,
    tttucker_to_dense,
    tucker_element,
    tucker_to_dense,
)

FORMATS = ("tt", "tucker", "tt-tucker", "qtt", "oqtt")
DEFAULT_TAU = 0.05
UNIT_BBOX = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


@dataclass(frozen=True)
class AxisLayout:
    """Mode map for unquantized formats: one mode per axis, time last."""

    original_shape: Tuple[int, int, int, int]
    spatial_modes: Tuple[int, int, int] = (0, 1, 2)
    time_mode: int = 3


@dataclass
class CompressedScene:
    format: str
    payload: Union[TTTensor, TuckerTensor, TTTuckerTensor]
    layout: Union[QuantLayout, AxisLayout]
    true_frame_count: int
    bbox: np.ndarray  # (2, 3) min/max corners
    tau: float
    resolution: Tuple[int, int, int]
    scalar_width: int

    def __post_init__(self):
        self.bbox = np.asarray(self.bbox, dtype=np.float64).reshape(2, 3)
        if self.format not in FORMATS:
            raise ValidationError(f"unknown format {self.format!r}")
        if self.scalar_width not in (4, 8):
            raise ValidationError(f"scalar width must be 4 or 8, got {self.scalar_width}")
        if self.true_frame_count > self.padded_frames:
            raise ValidationError("true frame count exceeds padded time size")

    @property
    def padded_frames(self) -> int:
        if isinstance(self.layout, QuantLayout):
            return self.layout.padded_frames
        return self.payload.shape[self.layout.time_mode]

    @property
    def pitch(self) -> np.ndarray:
        return (self.bbox[1] - self.bbox[0]) / np.asarray(self.resolution, dtype=np.float64)

    def report(self, padded: bool = False):
        shape = (
            self.resolution + (self.padded_frames,)
            if padded
            else self.resolution + (self.true_frame_count,)
        )
        return storage_report(self.payload, shape)


def _frame_spec(max_rank: Optional[int], eps: Optional[float]) -> TruncationSpec:
    if max_rank is None and eps is None:
        eps = 0.0  # keep everything above numerical noise
    return TruncationSpec(max_rank=max_rank, eps=eps)


def _merge_caps(labels: Sequence[str], r_spatial, r_time) -> Tuple[Optional[int], list]:
    """Base cap and per-edge caps for one merge-level truncation."""
    if r_spatial is None or r_time is None:
        base = None
    else:
        base = max(r_spatial, r_time)
    edge_caps: list = [None] * (len(labels) - 1)
    for e in range(len(labels) - 1):
        if labels[e].startswith("t") or labels[e + 1].startswith("t"):
            edge_caps[e] = r_time
    return base, edge_caps


def _round_merged(merged: TTTensor, labels, r_spatial, r_time, eps_merge) -> TTTensor:
    base, edge_caps = _merge_caps(labels, r_spatial, r_time)
    eps = eps_merge if eps_merge is not None else (0.0 if base is None else None)
    spec = TruncationSpec(max_rank=base, eps=eps)
    return tt_round(merged, spec, edge_caps=edge_caps)


def _tree_merge(tensors, schedule, r_spatial, r_time, eps_merge, threads) -> TTTensor:
    """Level-synchronous pairwise reduction; an odd tensor is promoted as-is.

    `schedule` holds one (labels, insert_pos) entry per level; the last entry
    is reused if promotions stretch the tree deeper. insert_pos is the index
    where a fresh time digit is spliced into both operands before the concat
    (quantized layouts), or None to concatenate along the existing time mode.
    """
    level = list(tensors)
    depth = 0
    while len(level) > 1:
        labels, insert_pos = schedule[min(depth, len(schedule) - 1)]
        pairs = [(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]

        def merge_pair(pair, pos=insert_pos, labs=labels):
            a, b = pair
            if pos is not None:
                a = insert_time_mode(a, pos)
                b = insert_time_mode(b, pos)
                mode = pos
            else:
                mode = labs.index("t")
            merged = tt_concat(a, b, mode)
            return _round_merged(merged, labs, r_spatial, r_time, eps_merge)

        if threads > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                nxt = list(pool.map(merge_pair, pairs))
        else:
            nxt = [merge_pair(p) for p in pairs]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
        depth += 1
    return level[0]


def _fold_merge(tensors, labels, time_mode, r_spatial, r_time, eps_merge) -> TTTensor:
    """Sequential left fold over the frame list (comparison variant)."""
    acc = tensors[0]
    for t in tensors[1:]:
        merged = tt_concat(acc, t, time_mode)
        acc = _round_merged(merged, labels, r_spatial, r_time, eps_merge)
    return acc


def compress_scene(
    frames: Iterable[DenseVolume],
    r_spatial: Optional[int] = None,
    r_time: Optional[int] = None,
    fmt: str = "oqtt",
    *,
    tau: float = DEFAULT_TAU,
    bbox=UNIT_BBOX,
    eps_frame: Optional[float] = None,
    eps_merge: Optional[float] = None,
    merge: str = "tree",
    pad_time_full: bool = False,
    pad_fill: Optional[float] = None,
    scalar_width: int = 4,
    threads: int = 1,
    budget: Optional[int] = None,
) -> CompressedScene:
    """Compress a stream of equally shaped 3D frames into one 4D scene.

    `r_spatial` caps ranks during per-frame compression, `r_time` caps the
    merge stage; leaving either unset keeps everything above numerical noise.
    `pad_fill` is the value written into spatial padding cells for the
    quantized formats; it defaults to -tau, the ambient value of empty space,
    so padding never introduces a spurious zero crossing.
    """
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if merge not in ("tree", "fold"):
        raise ValidationError(f"unknown merge strategy {merge!r}")
    if merge == "fold" and fmt in ("qtt", "oqtt"):
        raise ValidationError("fold merging is only defined for plain time axes (tt, tt-tucker)")
    fill = -tau if pad_fill is None else pad_fill
    frame_spec = _frame_spec(r_spatial, eps_frame)

    compressed: List[TTTensor] = []
    dense_frames: List[np.ndarray] = []  # tucker path only
    layout0: Optional[QuantLayout] = None
    shape0: Optional[tuple] = None

    def compress_one(vol: DenseVolume):
        if fmt in ("qtt", "oqtt"):
            make = frame_to_qtt if fmt == "qtt" else frame_to_oqtt
            return make(vol, frame_spec, fill=fill)
        return tt_svd(vol, frame_spec), None

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    pending = None
    try:
        for vol in frames:
            if not isinstance(vol, DenseVolume):
                vol = DenseVolume(np.asarray(vol))
            if vol.ndim != 3:
                raise ValidationError(f"frames must be 3D, got {vol.ndim} modes")
            if shape0 is None:
                shape0 = vol.shape
            elif vol.shape != shape0:
                raise ValidationError(
                    f"frame {len(compressed) + len(dense_frames)} has shape {vol.shape}, "
                    f"expected {shape0}"
                )
            if fmt == "tucker":
                dense_frames.append(np.asarray(vol.data, dtype=np.float64))
                check_budget(shape0 + (len(dense_frames),), 8, budget)
                vol = None
                continue
            if pool is not None:
                if pending is not None:
                    tt, lay = pending.result()
                    compressed.append(tt)
                    layout0 = layout0 or lay
                pending = pool.submit(compress_one, vol)
            else:
                tt, lay = compress_one(vol)
                compressed.append(tt)
                layout0 = layout0 or lay
            vol = None  # drop the dense frame before pulling the next one
        if pending is not None:
            tt, lay = pending.result()
            compressed.append(tt)
            layout0 = layout0 or lay
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    if shape0 is None:
        raise ValidationError("empty frame sequence")

    if fmt == "tucker":
        true_t = len(dense_frames)
        stack = np.stack(dense_frames, axis=3)
        dense_frames.clear()
        spec = TruncationSpec(eps=eps_frame if eps_frame is not None else 0.0)
        caps = [r_spatial, r_spatial, r_spatial, r_time]
        payload = tucker_hosvd(DenseVolume(stack), spec, mode_caps=caps)
        layout = AxisLayout(original_shape=shape0 + (true_t,))
        return _finish(payload, layout, "tucker", shape0, true_t, bbox, tau, scalar_width)

    true_t = len(compressed)

    if fmt in ("qtt", "oqtt"):
        k = layout0.bits_per_axis
        k_t = k if pad_time_full else (int(math.ceil(math.log2(true_t))) if true_t > 1 else 0)
        if k_t > k:
            raise ValidationError(
                f"{true_t} frames need {k_t} time digits, more than the {k} spatial digits"
            )
        while len(compressed) < (1 << k_t):
            compressed.append(compressed[-1])  # repeat the last frame
        layout = layout0.with_time(k_t, true_t)
        spatial_labels = [layout0.mode_schedule[i] for i in layout0.spatial_positions]
        group_width = 1 if fmt == "oqtt" else 3
        schedule = []
        labels = list(spatial_labels)
        for level in range(1, k_t + 1):
            g = k_t - level + 1
            pos = group_width * g
            labels = labels[:pos] + [f"t{g}"] + labels[pos:]
            schedule.append((tuple(labels), pos))
        if k_t == 0:
            payload = compressed[0]
        else:
            payload = _tree_merge(compressed, schedule, r_spatial, r_time, eps_merge, threads)
        return _finish(payload, layout, fmt, shape0, true_t, bbox, tau, scalar_width)

    # plain time axis: tt / tt-tucker
    labels = ("x", "y", "z", "t")
    tensors = [insert_time_mode(t, 3) for t in compressed]
    if merge == "fold":
        payload = _fold_merge(tensors, labels, 3, r_spatial, r_time, eps_merge)
    else:
        payload = _tree_merge(tensors, [(labels, None)], r_spatial, r_time, eps_merge, threads)
    layout = AxisLayout(original_shape=shape0 + (true_t,))
    if fmt == "tt-tucker":
        factor_spec = _frame_spec(r_spatial, eps_frame)
        payload = to_tt_tucker(payload, (0, 1, 2), factor_spec)
    return _finish(payload, layout, fmt, shape0, true_t, bbox, tau, scalar_width)


def _finish(payload, layout, fmt, resolution, true_t, bbox, tau, scalar_width) -> CompressedScene:
    dtype = np.float32 if scalar_width == 4 else np.float64
    return CompressedScene(
        format=fmt,
        payload=payload.astype(dtype),
        layout=layout,
        true_frame_count=true_t,
        bbox=np.asarray(bbox, dtype=np.float64).reshape(2, 3),
        tau=float(tau),
        resolution=tuple(int(s) for s in resolution),
        scalar_width=scalar_width,
    )


def extract_frame(scene: CompressedScene, i: int):
    """Slice frame `i` out of the compressed payload, staying compressed.

    Returns a 3D train (tt, qtt, oqtt), a 3D train with factors (tt-tucker),
    or a 3D core-plus-factors tensor (tucker).
    """
    if not 0 <= i < scene.true_frame_count:
        raise RangeError(
            f"frame {i} out of range [0, {scene.true_frame_count}) "
            "(padding is not addressable)"
        )
    if isinstance(scene.layout, QuantLayout):
        assignment = frame_subindex(scene.layout, i)
        t = scene.payload
        for pos in sorted(scene.layout.time_positions, reverse=True):
            t = tt_slice(t, pos, assignment[pos])
        return t
    if scene.format == "tucker":
        core = np.tensordot(
            scene.payload.core.astype(np.float64),
            scene.payload.factors[3][i, :].astype(np.float64),
            axes=(3, 0),
        )
        return TuckerTensor(core, scene.payload.factors[:3])
    if scene.format == "tt-tucker":
        inner = tt_slice(scene.payload.tt, scene.layout.time_mode, i)
        return TTTuckerTensor(inner, scene.payload.factors[:3])
    return tt_slice(scene.payload, scene.layout.time_mode, i)


def frame_to_dense(scene: CompressedScene, i: int, budget: Optional[int] = None) -> DenseVolume:
    """Extract frame `i` and densify it back to the original grid."""
    part = extract_frame(scene, i)
    if isinstance(scene.layout, QuantLayout):
        return quantized_frame_to_dense(part, scene.layout, budget)
    if scene.format == "tucker":
        return tucker_to_dense(part, budget)
    if scene.format == "tt-tucker":
        return tttucker_to_dense(part, budget)
    return tt_to_dense(part, budget)


def _voxel_of(scene: CompressedScene, p: Sequence[float]) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    lo, hi = scene.bbox[0], scene.bbox[1]
    if np.any(p < lo) or np.any(p > hi):
        raise RangeError(f"point {p.tolist()} outside bounding box")
    idx = np.floor((p - lo) / scene.pitch).astype(np.int64)
    return np.minimum(idx, np.asarray(scene.resolution) - 1)


def _element(scene: CompressedScene, x: int, y: int, z: int, t: int) -> float:
    if isinstance(scene.layout, QuantLayout):
        qidx = voxel_to_qindex(scene.layout, x, y, z, t)
        return tt_element(scene.payload, qidx)
    idx = (x, y, z, t)
    if scene.format == "tucker":
        return tucker_element(scene.payload, idx)
    if scene.format == "tt-tucker":
        return tttucker_element(scene.payload, idx)
    return tt_element(scene.payload, idx)


def query_point(
    scene: CompressedScene, p: Sequence[float], t: int, trilinear: bool = False
) -> float:
    """Value at world point `p` in frame `t`, from one compressed element
    (eight with trilinear interpolation). Cost is independent of `p`."""
    if not 0 <= t < scene.true_frame_count:
        raise RangeError(f"frame {t} out of range [0, {scene.true_frame_count})")
    if not trilinear:
        x, y, z = _voxel_of(scene, p)
        return _element(scene, int(x), int(y), int(z), int(t))
    p = np.asarray(p, dtype=np.float64)
    lo = scene.bbox[0]
    pitch = scene.pitch
    gp = (p - lo) / pitch - 0.5  # position in voxel-center coordinates
    base = np.floor(gp).astype(np.int64)
    frac = gp - base
    res = np.asarray(scene.resolution)
    value = 0.0
    for corner in range(8):
        offs = np.array([(corner >> 2) & 1, (corner >> 1) & 1, corner & 1])
        idx = np.clip(base + offs, 0, res - 1)
        w = np.prod(np.where(offs == 1, frac, 1.0 - frac))
        if w > 0.0:
            value += w * _element(scene, int(idx[0]), int(idx[1]), int(idx[2]), int(t))
    return float(value)


def query_gradient(scene: CompressedScene, p: Sequence[float], t: int) -> np.ndarray:
    """Central-difference gradient with a one-voxel step (six evaluations)."""
    if not 0 <= t < scene.true_frame_count:
        raise RangeError(f"frame {t} out of range [0, {scene.true_frame_count})")
    x, y, z = (int(v) for v in _voxel_of(scene, p))
    res = scene.resolution
    for axis, (c, n) in enumerate(zip((x, y, z), res)):
        if c < 1 or c > n - 2:
            raise RangeError(f"point too close to the bounding-box face along axis {axis}")
    pitch = scene.pitch
    grad = np.empty(3)
    for axis in range(3):
        hi = [x, y, z]
        lo_i = [x, y, z]
        hi[axis] += 1
        lo_i[axis] -= 1
        f_hi = _element(scene, hi[0], hi[1], hi[2], t)
        f_lo = _element(scene, lo_i[0], lo_i[1], lo_i[2], t)
        grad[axis] = (f_hi - f_lo) / (2.0 * pitch[axis])
    return grad
