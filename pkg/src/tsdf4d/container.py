"""Bit-exact binary container for compressed scenes.

Layout, little-endian throughout:

    magic "T4DT" | version u16 | format u8 | scalar_width u8
    resolution 3xu32 | true_frame_count u32 | padded dims 4xu32
    tau f64 | bbox 6xf64
    layout descriptor: u32 byte length + UTF-8 JSON
    array table: u32 count, then per array u8 ndim + ndim x u32 dims
    payload: u64 byte length + raw row-major scalars
    trailer: u32 CRC32 of the payload

The header is self-contained: the JSON descriptor carries the mode schedule,
bit-order and octet-packing conventions, and factor placement, so a reader
needs no side channel.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import ValidationError
from .pipeline import AxisLayout, CompressedScene
from .quantics import BIT_ORDER, OCTET_PACKING, QuantLayout
from .tensors import TTTensor, TTTuckerTensor, TuckerTensor

MAGIC = b"T4DT"
VERSION = 1
FORMAT_TAGS = {"tt": 0, "tucker": 1, "tt-tucker": 2, "qtt": 3, "oqtt": 4}
TAG_FORMATS = {v: k for k, v in FORMAT_TAGS.items()}


@dataclass
class ContainerHeader:
    version: int
    format: str
    scalar_width: int
    resolution: Tuple[int, int, int]
    true_frame_count: int
    padded_dims: Tuple[int, int, int, int]
    tau: float
    bbox: Tuple[float, ...]
    layout: dict
    array_shapes: List[Tuple[int, ...]]
    payload_bytes: int


def _layout_descriptor(scene: CompressedScene) -> dict:
    if isinstance(scene.layout, QuantLayout):
        desc = {
            "kind": scene.layout.kind,
            "bits_per_axis": scene.layout.bits_per_axis,
            "time_bits": scene.layout.time_bits,
            "mode_schedule": list(scene.layout.mode_schedule),
            "original_shape": list(scene.layout.original_shape),
            "bit_order": BIT_ORDER,
            "octet_packing": OCTET_PACKING,
        }
    else:
        desc = {
            "kind": "axis",
            "spatial_modes": list(scene.layout.spatial_modes),
            "time_mode": scene.layout.time_mode,
            "original_shape": list(scene.layout.original_shape),
        }
    if scene.format == "tt-tucker":
        desc["factor_modes"] = [
            d for d, f in enumerate(scene.payload.factors) if f is not None
        ]
    return desc


def _payload_arrays(scene: CompressedScene) -> List[np.ndarray]:
    return scene.payload.arrays()


def write_scene(scene: CompressedScene, path) -> ContainerHeader:
    """Serialize a scene; returns the header with the payload byte count."""
    dtype = np.dtype("<f4") if scene.scalar_width == 4 else np.dtype("<f8")
    arrays = _payload_arrays(scene)
    for a in arrays:
        if a.dtype.itemsize != scene.scalar_width:
            raise ValidationError(
                f"payload dtype {a.dtype} does not match scalar width {scene.scalar_width}"
            )
    blobs = [np.ascontiguousarray(a, dtype=dtype).tobytes() for a in arrays]
    payload = b"".join(blobs)
    layout_json = json.dumps(_layout_descriptor(scene), sort_keys=True).encode("utf-8")

    head = bytearray()
    head += MAGIC
    head += struct.pack("<HBB", VERSION, FORMAT_TAGS[scene.format], scene.scalar_width)
    head += struct.pack("<3I", *scene.resolution)
    head += struct.pack("<I", scene.true_frame_count)
    padded = scene.resolution + (scene.padded_frames,)
    if isinstance(scene.layout, QuantLayout):
        r = scene.layout.padded_resolution
        padded = (r, r, r, scene.layout.padded_frames)
    head += struct.pack("<4I", *padded)
    head += struct.pack("<d", scene.tau)
    head += struct.pack("<6d", *scene.bbox.ravel().tolist())
    head += struct.pack("<I", len(layout_json)) + layout_json
    head += struct.pack("<I", len(arrays))
    shapes = []
    for a in arrays:
        head += struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
        shapes.append(tuple(a.shape))
    head += struct.pack("<Q", len(payload))

    with open(path, "wb") as f:
        f.write(bytes(head))
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))

    return ContainerHeader(
        version=VERSION,
        format=scene.format,
        scalar_width=scene.scalar_width,
        resolution=scene.resolution,
        true_frame_count=scene.true_frame_count,
        padded_dims=padded,
        tau=scene.tau,
        bbox=tuple(scene.bbox.ravel().tolist()),
        layout=_layout_descriptor(scene),
        array_shapes=shapes,
        payload_bytes=len(payload),
    )


class _Reader:
    def __init__(self, f):
        self.f = f

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        raw = self.f.read(size)
        if len(raw) != size:
            raise ValidationError("truncated container file")
        out = struct.unpack(fmt, raw)
        return out[0] if len(out) == 1 else out


def read_header(path) -> ContainerHeader:
    with open(path, "rb") as f:
        r = _Reader(f)
        if f.read(4) != MAGIC:
            raise ValidationError(f"{path} is not a scene container (bad magic)")
        version, tag, width = r.take("<HBB")
        if version != VERSION:
            raise ValidationError(f"unsupported container version {version}")
        if tag not in TAG_FORMATS:
            raise ValidationError(f"unknown format tag {tag}")
        if width not in (4, 8):
            raise ValidationError(f"invalid scalar width {width}")
        resolution = r.take("<3I")
        true_t = r.take("<I")
        padded = r.take("<4I")
        tau = r.take("<d")
        bbox = r.take("<6d")
        layout_len = r.take("<I")
        layout = json.loads(f.read(layout_len).decode("utf-8"))
        n_arrays = r.take("<I")
        shapes = []
        for _ in range(n_arrays):
            ndim = r.take("<B")
            dims = r.take(f"<{ndim}I")
            shapes.append(dims if isinstance(dims, tuple) else (dims,))
        payload_bytes = r.take("<Q")
    return ContainerHeader(
        version=version,
        format=TAG_FORMATS[tag],
        scalar_width=width,
        resolution=resolution,
        true_frame_count=true_t,
        padded_dims=padded,
        tau=tau,
        bbox=bbox,
        layout=layout,
        array_shapes=shapes,
        payload_bytes=payload_bytes,
    )


def read_scene(path) -> CompressedScene:
    header = read_header(path)
    dtype = np.dtype("<f4") if header.scalar_width == 4 else np.dtype("<f8")
    with open(path, "rb") as f:
        data = f.read()
    payload_start = len(data) - 4 - header.payload_bytes
    payload = data[payload_start:-4]
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise ValidationError(f"payload checksum mismatch in {path}")

    arrays = []
    offset = 0
    for shape in header.array_shapes:
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(
            payload, dtype=dtype, count=n, offset=offset
        ).reshape(shape).copy()
        arrays.append(arr)
        offset += n * dtype.itemsize
    if offset != header.payload_bytes:
        raise ValidationError("payload size disagrees with the shape table")

    desc = header.layout
    fmt = header.format
    if desc.get("kind") in ("qtt", "oqtt"):
        layout = QuantLayout(
            kind=desc["kind"],
            bits_per_axis=desc["bits_per_axis"],
            time_bits=desc["time_bits"],
            mode_schedule=tuple(desc["mode_schedule"]),
            original_shape=tuple(desc["original_shape"]),
        )
    else:
        layout = AxisLayout(
            original_shape=tuple(desc["original_shape"]),
            spatial_modes=tuple(desc["spatial_modes"]),
            time_mode=desc["time_mode"],
        )

    if fmt == "tucker":
        payload_tensor = TuckerTensor(arrays[0], tuple(arrays[1:]))
    elif fmt == "tt-tucker":
        factor_modes = desc["factor_modes"]
        n_modes = len(arrays) - len(factor_modes)
        tt = TTTensor(tuple(arrays[:n_modes]))
        factors: list = [None] * n_modes
        for d, arr in zip(factor_modes, arrays[n_modes:]):
            factors[d] = arr
        payload_tensor = TTTuckerTensor(tt, tuple(factors))
    else:
        payload_tensor = TTTensor(tuple(arrays))

    return CompressedScene(
        format=fmt,
        payload=payload_tensor,
        layout=layout,
        true_frame_count=header.true_frame_count,
        bbox=np.asarray(header.bbox).reshape(2, 3),
        tau=header.tau,
        resolution=tuple(header.resolution),
        scalar_width=header.scalar_width,
    )
