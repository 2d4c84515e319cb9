"""Request/response models for the scene service."""

from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    detail: str
    code: Literal["validation", "range", "io", "budget"] = "validation"


class CompressRequest(BaseModel):
    input_dir: str
    output_path: str
    format: Literal["tt", "tucker", "tt-tucker", "qtt", "oqtt"] = "oqtt"
    max_rank_spatial: Optional[int] = Field(default=None, ge=1)
    max_rank_time: Optional[int] = Field(default=None, ge=1)
    eps_frame: Optional[float] = Field(default=None, ge=0)
    eps_merge: Optional[float] = Field(default=None, ge=0)
    tau: float = 0.05
    tau_units: Literal["normalized", "world"] = "normalized"
    resolution: int = Field(default=64, ge=2)
    bbox: Optional[List[List[float]]] = None  # [[min x,y,z], [max x,y,z]]
    scalar_width: Literal[4, 8] = 4
    threads: int = Field(default=1, ge=1)
    merge: Literal["tree", "fold"] = "tree"
    pad_time_full: bool = False
    pad_fill: Optional[float] = None


class StageTimings(BaseModel):
    load_and_compress_frames: float
    merge: float
    serialize: float
    total: float


class CompressResponse(BaseModel):
    output_path: str
    format: str
    resolution: Tuple[int, int, int]
    true_frame_count: int
    padded_dims: Tuple[int, int, int, int]
    tau: float
    parameter_count: int
    uncompressed_count_true: int
    uncompressed_count_padded: int
    compression_ratio_true: float
    compression_ratio_padded: float
    bytes_on_disk: int
    payload_bytes: int
    max_rank: int
    timings: StageTimings


class ExtractRequest(BaseModel):
    scene_path: str
    frame: int = Field(ge=0)
    output_path: str
    as_mesh: bool = False
    iso: float = 0.0


class ExtractResponse(BaseModel):
    output_path: str
    frame: int
    kind: Literal["volume", "mesh"]
    vertices: Optional[int] = None
    triangles: Optional[int] = None


class QueryRequest(BaseModel):
    scene_path: str
    x: float
    y: float
    z: float
    t: int = Field(ge=0)
    gradient: bool = False
    trilinear: bool = False


class QueryResponse(BaseModel):
    value: float
    gradient: Optional[Tuple[float, float, float]] = None


class MetricsRequest(BaseModel):
    scene_path: str
    reference_dir: str
    frames: Optional[List[int]] = None  # default: first, middle, last
    samples: int = Field(default=30_000, ge=1)
    seed: int = 0
    iso: float = 0.0
    chamfer_normalized: bool = True
    hausdorff_point_to_triangle: bool = False


class FrameMetrics(BaseModel):
    frame: int
    l2: float
    iou: float
    hausdorff: float
    chamfer: float


class MetricsResponse(BaseModel):
    l2: float
    iou: float
    hausdorff: float
    chamfer: float
    frames_evaluated: List[int]
    chamfer_normalized: bool
    hausdorff_operands: str
    per_frame: List[FrameMetrics]


class BenchRequest(BaseModel):
    output_csv: str
    resolution: int = Field(default=32, ge=4)
    frames: int = Field(default=8, ge=1)
    tau: float = 0.05
    formats: List[Literal["tt", "tucker", "tt-tucker", "qtt", "oqtt"]] = ["tt", "oqtt"]
    ranks: List[int] = [10, 20, 40]
    samples: int = Field(default=2000, ge=1)
    seed: int = 0


class BenchRow(BaseModel):
    format: str
    max_rank: int
    parameter_count: int
    ratio_true: float
    ratio_padded: float
    frame_stage_rel_error: float
    l2: float
    iou: float
    hausdorff: float
    chamfer: float
    seconds: float


class BenchResponse(BaseModel):
    output_csv: str
    rows: List[BenchRow]


class InfoRequest(BaseModel):
    scene_path: str


class InfoResponse(BaseModel):
    format: str
    scalar_width: int
    resolution: Tuple[int, int, int]
    true_frame_count: int
    padded_dims: Tuple[int, int, int, int]
    tau: float
    bbox: List[float]
    layout: dict
    parameter_count: int
    compression_ratio_true: float
    compression_ratio_padded: float
    payload_bytes: int


class HealthResponse(BaseModel):
    status: str
    version: str
