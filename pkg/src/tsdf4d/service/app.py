"""FastAPI service exposing the compression pipeline over HTTP.

The handlers are plain functions over the pydantic schemas, so the CLI can
invoke them in-process through the same code path the HTTP routes use. Scenes
are cached per (path, mtime, size) so repeated queries against one scene pay
the file read once.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..container import read_header, read_scene, write_scene
from ..errors import BudgetError, RangeError, ValidationError
from ..evaluate import BenchConfig, default_frames, evaluate_scene, run_bench
from ..geometry.marching import marching_cubes
from ..geometry.mesh import SceneBounds, save_obj
from ..metrics import write_report_csv
from ..pipeline import compress_scene, frame_to_dense, query_gradient, query_point
from ..sources import open_source
from . import schemas

_SCENE_CACHE: dict = {}
_CACHE_LIMIT = 8


def _load_scene(path_str: str):
    path = Path(path_str)
    if not path.exists():
        raise FileNotFoundError(f"scene file {path} does not exist")
    stat = path.stat()
    key = (str(path.resolve()), stat.st_mtime_ns, stat.st_size)
    if key not in _SCENE_CACHE:
        if len(_SCENE_CACHE) >= _CACHE_LIMIT:
            _SCENE_CACHE.pop(next(iter(_SCENE_CACHE)))
        _SCENE_CACHE[key] = read_scene(path)
    return _SCENE_CACHE[key]


def handle_compress(req: schemas.CompressRequest) -> schemas.CompressResponse:
    t0 = time.perf_counter()
    source = open_source(
        req.input_dir,
        resolution=req.resolution,
        tau=req.tau,
        tau_units=req.tau_units,
        bbox=req.bbox,
    )
    scene = compress_scene(
        source.volumes(),
        r_spatial=req.max_rank_spatial,
        r_time=req.max_rank_time,
        fmt=req.format,
        tau=source.tau,
        bbox=source.bounds.as_array(),
        eps_frame=req.eps_frame,
        eps_merge=req.eps_merge,
        merge=req.merge,
        pad_time_full=req.pad_time_full,
        pad_fill=req.pad_fill,
        scalar_width=req.scalar_width,
        threads=req.threads,
    )
    t1 = time.perf_counter()
    header = write_scene(scene, req.output_path)
    t2 = time.perf_counter()
    true_rep = scene.report()
    padded_rep = scene.report(padded=True)
    ranks = (
        scene.payload.tt.ranks if req.format == "tt-tucker"
        else scene.payload.ranks if req.format != "tucker"
        else scene.payload.core.shape
    )
    return schemas.CompressResponse(
        output_path=req.output_path,
        format=scene.format,
        resolution=scene.resolution,
        true_frame_count=scene.true_frame_count,
        padded_dims=header.padded_dims,
        tau=scene.tau,
        parameter_count=true_rep.parameter_count,
        uncompressed_count_true=true_rep.uncompressed_count,
        uncompressed_count_padded=padded_rep.uncompressed_count,
        compression_ratio_true=true_rep.compression_ratio,
        compression_ratio_padded=padded_rep.compression_ratio,
        bytes_on_disk=Path(req.output_path).stat().st_size,
        payload_bytes=header.payload_bytes,
        max_rank=int(max(ranks)),
        timings=schemas.StageTimings(
            load_and_compress_frames=t1 - t0,
            merge=0.0,  # folded into the streaming pass above
            serialize=t2 - t1,
            total=t2 - t0,
        ),
    )


def handle_extract(req: schemas.ExtractRequest) -> schemas.ExtractResponse:
    scene = _load_scene(req.scene_path)
    volume = frame_to_dense(scene, req.frame)
    if req.as_mesh:
        bounds = SceneBounds(scene.bbox[0], scene.bbox[1])
        mesh = marching_cubes(volume, req.iso, bounds)
        save_obj(mesh, req.output_path)
        return schemas.ExtractResponse(
            output_path=req.output_path,
            frame=req.frame,
            kind="mesh",
            vertices=mesh.num_vertices,
            triangles=mesh.num_triangles,
        )
    np.save(req.output_path, np.asarray(volume.data))
    return schemas.ExtractResponse(
        output_path=req.output_path, frame=req.frame, kind="volume"
    )


def handle_query(req: schemas.QueryRequest) -> schemas.QueryResponse:
    scene = _load_scene(req.scene_path)
    p = (req.x, req.y, req.z)
    value = query_point(scene, p, req.t, trilinear=req.trilinear)
    grad = None
    if req.gradient:
        grad = tuple(query_gradient(scene, p, req.t).tolist())
    return schemas.QueryResponse(value=value, gradient=grad)


def handle_metrics(req: schemas.MetricsRequest) -> schemas.MetricsResponse:
    scene = _load_scene(req.scene_path)
    frames = req.frames if req.frames is not None else default_frames(scene.true_frame_count)
    source = open_source(
        req.reference_dir,
        resolution=scene.resolution[0],
        tau=scene.tau,
        tau_units="world",
        bbox=(scene.bbox[0].tolist(), scene.bbox[1].tolist()),
    )
    wanted = set(frames)
    references = {
        i: vol for i, vol in enumerate(source.volumes()) if i in wanted
    }
    report, rows = evaluate_scene(
        scene,
        references,
        frames=frames,
        samples=req.samples,
        seed=req.seed,
        iso=req.iso,
        chamfer_normalized=req.chamfer_normalized,
        hausdorff_point_to_triangle=req.hausdorff_point_to_triangle,
    )
    return schemas.MetricsResponse(
        l2=report.l2,
        iou=report.iou,
        hausdorff=report.hausdorff,
        chamfer=report.chamfer,
        frames_evaluated=report.frames_evaluated,
        chamfer_normalized=report.chamfer_normalized,
        hausdorff_operands=report.hausdorff_operands,
        per_frame=[schemas.FrameMetrics(**r) for r in rows],
    )


def handle_bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
    rows = run_bench(
        BenchConfig(
            resolution=req.resolution,
            frames=req.frames,
            tau=req.tau,
            formats=req.formats,
            ranks=req.ranks,
            samples=req.samples,
            seed=req.seed,
        )
    )
    write_report_csv(rows, req.output_csv)
    return schemas.BenchResponse(
        output_csv=req.output_csv, rows=[schemas.BenchRow(**r) for r in rows]
    )


def handle_info(req: schemas.InfoRequest) -> schemas.InfoResponse:
    path = Path(req.scene_path)
    if not path.exists():
        raise FileNotFoundError(f"scene file {path} does not exist")
    header = read_header(path)
    param_count = header.payload_bytes // header.scalar_width
    true_elems = int(np.prod(header.resolution, dtype=np.int64)) * header.true_frame_count
    padded_elems = int(np.prod(header.padded_dims, dtype=np.int64))
    return schemas.InfoResponse(
        format=header.format,
        scalar_width=header.scalar_width,
        resolution=header.resolution,
        true_frame_count=header.true_frame_count,
        padded_dims=header.padded_dims,
        tau=header.tau,
        bbox=list(header.bbox),
        layout=header.layout,
        parameter_count=param_count,
        compression_ratio_true=true_elems / param_count,
        compression_ratio_padded=padded_elems / param_count,
        payload_bytes=header.payload_bytes,
    )


# (request model, handler, response model) per route; the CLI uses this table
# to call handlers in-process with the same payloads the HTTP API accepts.
ROUTES = {
    "/compress": (schemas.CompressRequest, handle_compress, schemas.CompressResponse),
    "/extract": (schemas.ExtractRequest, handle_extract, schemas.ExtractResponse),
    "/query": (schemas.QueryRequest, handle_query, schemas.QueryResponse),
    "/metrics": (schemas.MetricsRequest, handle_metrics, schemas.MetricsResponse),
    "/bench": (schemas.BenchRequest, handle_bench, schemas.BenchResponse),
    "/info": (schemas.InfoRequest, handle_info, schemas.InfoResponse),
}

_ERROR_STATUS = {"validation": 422, "range": 416, "io": 404, "budget": 507}


def classify_error(exc: Exception) -> schemas.ErrorBody:
    if isinstance(exc, ValidationError):
        return schemas.ErrorBody(detail=str(exc), code="validation")
    if isinstance(exc, RangeError):
        return schemas.ErrorBody(detail=str(exc), code="range")
    if isinstance(exc, BudgetError):
        return schemas.ErrorBody(detail=str(exc), code="budget")
    if isinstance(exc, OSError):
        return schemas.ErrorBody(detail=str(exc), code="io")
    raise exc


def create_app() -> FastAPI:
    app = FastAPI(title="tsdf4d scene service", version=__version__)

    @app.exception_handler(ValidationError)
    @app.exception_handler(RangeError)
    @app.exception_handler(BudgetError)
    @app.exception_handler(OSError)
    async def _domain_error(request: Request, exc: Exception):
        body = classify_error(exc)
        return JSONResponse(status_code=_ERROR_STATUS[body.code], content=body.model_dump())

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/compress", response_model=schemas.CompressResponse)
    def compress(body: schemas.CompressRequest):
        return handle_compress(body)

    @app.post("/extract", response_model=schemas.ExtractResponse)
    def extract(body: schemas.ExtractRequest):
        return handle_extract(body)

    @app.post("/query", response_model=schemas.QueryResponse)
    def query(body: schemas.QueryRequest):
        return handle_query(body)

    @app.post("/metrics", response_model=schemas.MetricsResponse)
    def metrics(body: schemas.MetricsRequest):
        return handle_metrics(body)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(body: schemas.BenchRequest):
        return handle_bench(body)

    @app.post("/info", response_model=schemas.InfoResponse)
    def info(body: schemas.InfoRequest):
        return handle_info(body)

    return app


app = create_app()
