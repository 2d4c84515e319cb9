"""Quantized reshaping between voxel grids and bit-indexed trains.

A spatial axis of size 2^k is split into k binary digits, most significant
first, so mode 1 is the coarsest split (octree-root analogy). The octet
variant merges each (x_j, y_j, z_j) digit triple into one size-8 mode with
packing o = 4x + 2y + z. Time digits, when present, sit right after their
spatial group: (x_1,y_1,z_1,t_1,...) resp. (o_1,t_1,...), with t_1 the most
significant bit of the frame index. When the time axis has fewer digits than
the spatial ones, the leading groups carry them and the tail groups have none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .decompose import TruncationSpec, tt_svd
from .errors import RangeError, ValidationError
from .tensors import DenseVolume, TTTensor, crop, tt_to_dense

BIT_ORDER = "msb-first"
OCTET_PACKING = "4x+2y+z"


def build_schedule(kind: str, bits_per_axis: int, time_bits: int) -> Tuple[str, ...]:
    if time_bits > bits_per_axis:
        raise ValidationError(
            f"{time_bits} time digits cannot interleave into {bits_per_axis} spatial groups"
        )
    modes: List[str] = []
    for j in range(1, bits_per_axis + 1):
        if kind == "qtt":
            modes += [f"x{j}", f"y{j}", f"z{j}"]
        elif kind == "oqtt":
            modes.append(f"o{j}")
        else:
            raise ValidationError(f"unknown quantized kind {kind!r}")
        if j <= time_bits:
            modes.append(f"t{j}")
    return tuple(modes)


def mode_size(label: str) -> int:
    return 8 if label[0] == "o" else 2


@dataclass(frozen=True)
class QuantLayout:
    """Self-describing mode layout of a quantized train."""

    kind: str
    bits_per_axis: int
    time_bits: int
    mode_schedule: Tuple[str, ...]
    original_shape: Tuple[int, int, int, int]

    def __post_init__(self):
        expected = build_schedule(self.kind, self.bits_per_axis, self.time_bits)
        if tuple(self.mode_schedule) != expected:
            raise ValidationError(
                f"schedule {self.mode_schedule} does not match "
                f"{self.kind} with {self.bits_per_axis}+{self.time_bits} digits"
            )
        total = sum(int(math.log2(mode_size(m))) for m in self.mode_schedule)
        if total != 3 * self.bits_per_axis + self.time_bits:
            raise ValidationError("digit count mismatch in schedule")

    @property
    def mode_sizes(self) -> Tuple[int, ...]:
        return tuple(mode_size(m) for m in self.mode_schedule)

    @property
    def padded_resolution(self) -> int:
        return 1 << self.bits_per_axis

    @property
    def padded_frames(self) -> int:
        return 1 << self.time_bits

    @property
    def time_positions(self) -> Tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.mode_schedule) if m[0] == "t")

    @property
    def spatial_positions(self) -> Tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.mode_schedule) if m[0] != "t")

    def with_time(self, time_bits: int, frame_count: int) -> "QuantLayout":
        return replace(
            self,
            time_bits=time_bits,
            mode_schedule=build_schedule(self.kind, self.bits_per_axis, time_bits),
            original_shape=self.original_shape[:3] + (frame_count,),
        )


def _bit(value: int, total_bits: int, level: int) -> int:
    """Digit `level` (1-based, most significant first) of a value."""
    return (value >> (total_bits - level)) & 1


def voxel_to_qindex(layout: QuantLayout, x: int, y: int, z: int, t: int = 0) -> Tuple[int, ...]:
    """Map voxel coordinates (and frame) to the layout's multi-index."""
    res = layout.padded_resolution
    for name, c in (("x", x), ("y", y), ("z", z)):
        if not 0 <= c < res:
            raise RangeError(f"coordinate {name}={c} out of range [0, {res})")
    if not 0 <= t < layout.padded_frames:
        raise RangeError(f"frame {t} out of range [0, {layout.padded_frames})")
    k, kt = layout.bits_per_axis, layout.time_bits
    out = []
    for label in layout.mode_schedule:
        j = int(label[1:])
        if label[0] == "x":
            out.append(_bit(x, k, j))
        elif label[0] == "y":
            out.append(_bit(y, k, j))
        elif label[0] == "z":
            out.append(_bit(z, k, j))
        elif label[0] == "o":
            out.append(4 * _bit(x, k, j) + 2 * _bit(y, k, j) + _bit(z, k, j))
        else:
            out.append(_bit(t, kt, j))
    return tuple(out)


def qindex_to_voxel(layout: QuantLayout, index: Sequence[int]) -> Tuple[int, int, int, int]:
    """Exact inverse of voxel_to_qindex."""
    if len(index) != len(layout.mode_schedule):
        raise RangeError(
            f"index has {len(index)} digits, schedule has {len(layout.mode_schedule)}"
        )
    k, kt = layout.bits_per_axis, layout.time_bits
    x = y = z = t = 0
    for label, digit in zip(layout.mode_schedule, index):
        digit = int(digit)
        if not 0 <= digit < mode_size(label):
            raise RangeError(f"digit {digit} out of range for mode {label}")
        j = int(label[1:])
        if label[0] == "x":
            x |= digit << (k - j)
        elif label[0] == "y":
            y |= digit << (k - j)
        elif label[0] == "z":
            z |= digit << (k - j)
        elif label[0] == "o":
            x |= ((digit >> 2) & 1) << (k - j)
            y |= ((digit >> 1) & 1) << (k - j)
            z |= (digit & 1) << (k - j)
        else:
            t |= digit << (kt - j)
    return x, y, z, t


def frame_subindex(layout: QuantLayout, frame_i: int) -> List[Optional[int]]:
    """Per-mode assignment selecting one frame: bits of `frame_i` on the time
    modes (most significant first), None (full slice) on spatial modes."""
    if not 0 <= frame_i < layout.padded_frames:
        raise RangeError(f"frame {frame_i} out of range [0, {layout.padded_frames})")
    out: List[Optional[int]] = []
    for label in layout.mode_schedule:
        if label[0] == "t":
            out.append(_bit(frame_i, layout.time_bits, int(label[1:])))
        else:
            out.append(None)
    return out


def _quantize_axes(data: np.ndarray, k: int, kind: str) -> np.ndarray:
    """Reshape a (2^k)^3 array into the spatial digit layout."""
    a = data.reshape((2,) * (3 * k))
    perm = []
    for j in range(k):
        perm += [j, k + j, 2 * k + j]
    a = a.transpose(perm)
    if kind == "oqtt":
        a = a.reshape((8,) * k)
    return a


def _unquantize_axes(data: np.ndarray, k: int, kind: str) -> np.ndarray:
    a = data.reshape((2,) * (3 * k))
    perm = []
    for j in range(k):
        perm += [j, k + j, 2 * k + j]
    inv = np.argsort(perm)
    res = 1 << k
    return a.transpose(tuple(inv)).reshape(res, res, res)


def _frame_to_quantized(v: DenseVolume, spec: TruncationSpec, fill: float, kind: str):
    if v.ndim != 3:
        raise ValidationError(f"expected a 3D frame, got {v.ndim} modes")
    k = max(int(math.ceil(math.log2(s))) if s > 1 else 0 for s in v.shape)
    k = max(k, 1)
    target = 1 << k
    padded = v
    if v.shape != (target, target, target):
        arr = np.full((target, target, target), fill, dtype=v.dtype)
        arr[tuple(slice(0, s) for s in v.shape)] = v.data
        padded = DenseVolume(arr)
    layout = QuantLayout(
        kind=kind,
        bits_per_axis=k,
        time_bits=0,
        mode_schedule=build_schedule(kind, k, 0),
        original_shape=tuple(v.shape) + (1,),
    )
    quantized = _quantize_axes(np.asarray(padded.data, dtype=np.float64), k, kind)
    return tt_svd(DenseVolume(quantized), spec), layout


def frame_to_qtt(v: DenseVolume, spec: TruncationSpec, fill: float = 0.0):
    """Pad to powers of two, split axes into interleaved binary digits, and
    compress. Returns the train and its layout."""
    return _frame_to_quantized(v, spec, fill, "qtt")


def frame_to_oqtt(v: DenseVolume, spec: TruncationSpec, fill: float = 0.0):
    """As frame_to_qtt, but with each digit triple merged into a size-8 mode."""
    return _frame_to_quantized(v, spec, fill, "oqtt")


def quantized_frame_to_dense(
    t: TTTensor, layout: QuantLayout, budget: Optional[int] = None
) -> DenseVolume:
    """Densify a spatial-only quantized train back to the original 3D grid."""
    spatial = [layout.mode_schedule[i] for i in layout.spatial_positions]
    if t.ndim != len(spatial):
        raise ValidationError(
            f"train has {t.ndim} modes, layout expects {len(spatial)} spatial modes"
        )
    dense = tt_to_dense(t, budget)
    cube = _unquantize_axes(np.asarray(dense.data), layout.bits_per_axis, layout.kind)
    return crop(DenseVolume(cube), layout.original_shape[:3])
