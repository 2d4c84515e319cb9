"""Scene-level quality evaluation and rank-sweep benchmarking.

Reconstruction quality is measured per evaluated frame (defaults: first,
middle, last) and averaged: tensor-space l2 and occupancy IoU on the grids,
Hausdorff and sampled Chamfer on meshes extracted from both grids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .geometry.marching import marching_cubes
from .geometry.mesh import SceneBounds, TriangleMesh, sample_surface
from .geometry.voxelize import _TriangleIndex
from .metrics import DEFAULT_SAMPLES, MetricReport, chamfer, hausdorff, iou, l2
from .pipeline import CompressedScene, compress_scene, frame_to_dense
from .synthetic import translating_sphere_frames
from .tensors import DenseVolume


def default_frames(frame_count: int) -> List[int]:
    """First, middle, and last frame indices (deduplicated, ordered)."""
    picks = sorted({0, frame_count // 2, frame_count - 1})
    return [p for p in picks if 0 <= p < frame_count]


def hausdorff_mesh(a: TriangleMesh, b: TriangleMesh, point_to_triangle: bool = False) -> float:
    """Symmetric Hausdorff between meshes over vertex sets, or vertex-to-surface
    distances when `point_to_triangle` is set."""
    if not point_to_triangle:
        return hausdorff(a.vertices, b.vertices)
    d_ab = _TriangleIndex(b).exact(a.vertices).max()
    d_ba = _TriangleIndex(a).exact(b.vertices).max()
    return float(max(d_ab, d_ba))


def evaluate_scene(
    scene: CompressedScene,
    references: Dict[int, DenseVolume],
    frames: Optional[Sequence[int]] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    iso: float = 0.0,
    chamfer_normalized: bool = True,
    hausdorff_point_to_triangle: bool = False,
):
    """Compare extracted frames against reference volumes.

    Returns (MetricReport with per-metric averages, list of per-frame rows).
    """
    frames = list(frames) if frames is not None else default_frames(scene.true_frame_count)
    if not frames:
        raise ValidationError("no frames to evaluate")
    bounds = SceneBounds(scene.bbox[0], scene.bbox[1])
    rows = []
    for i in frames:
        if i not in references:
            raise ValidationError(f"no reference volume for frame {i}")
        ref = references[i]
        rec = frame_to_dense(scene, i)
        if ref.shape != rec.shape:
            raise ValidationError(
                f"reference frame {i} has shape {ref.shape}, scene frames are {rec.shape}"
            )
        row = {
            "frame": i,
            "l2": l2(ref, rec),
            "iou": iou(ref, rec, iso),
        }
        mesh_ref = marching_cubes(ref, iso, bounds)
        mesh_rec = marching_cubes(rec, iso, bounds)
        if mesh_ref.num_triangles == 0 and mesh_rec.num_triangles == 0:
            row["hausdorff"] = 0.0
            row["chamfer"] = 0.0
        elif mesh_ref.num_triangles == 0 or mesh_rec.num_triangles == 0:
            diag = float(np.linalg.norm(bounds.extent))
            row["hausdorff"] = diag  # one side vanished entirely
            row["chamfer"] = diag**2
        else:
            row["hausdorff"] = hausdorff_mesh(
                mesh_ref, mesh_rec, hausdorff_point_to_triangle
            )
            pts_ref = sample_surface(mesh_ref, samples, seed)
            pts_rec = sample_surface(mesh_rec, samples, seed)
            row["chamfer"] = chamfer(pts_ref, pts_rec, normalized=chamfer_normalized)
        rows.append(row)
    report = MetricReport(
        l2=float(np.mean([r["l2"] for r in rows])),
        iou=float(np.mean([r["iou"] for r in rows])),
        hausdorff=float(np.mean([r["hausdorff"] for r in rows])),
        chamfer=float(np.mean([r["chamfer"] for r in rows])),
        frames_evaluated=frames,
        chamfer_normalized=chamfer_normalized,
        hausdorff_operands="point-to-triangle" if hausdorff_point_to_triangle else "vertices",
    )
    return report, rows


@dataclass
class BenchConfig:
    resolution: int = 32
    frames: int = 8
    tau: float = 0.05
    formats: Sequence[str] = ("tt", "oqtt")
    ranks: Sequence[int] = (10, 20, 40)
    samples: int = 2000
    seed: int = 0


def run_bench(config: BenchConfig) -> List[dict]:
    """Rank sweep: one row per (format, rank) with quality vs storage."""
    from .synthetic import SPHERE_BBOX

    base = list(
        translating_sphere_frames(config.resolution, config.frames, tau=config.tau)
    )
    references = dict(enumerate(base))
    rows = []
    for fmt in config.formats:
        for rank in config.ranks:
            t0 = time.perf_counter()
            scene = compress_scene(
                base,
                r_spatial=rank,
                r_time=rank,
                fmt=fmt,
                tau=config.tau,
                bbox=SPHERE_BBOX,
                scalar_width=8,
            )
            elapsed = time.perf_counter() - t0
            # per-frame stage error, aggregated over the sequence
            frame_sq = 0.0
            ref_sq = 0.0
            for i, ref in references.items():
                single = compress_scene(
                    [ref],
                    r_spatial=rank,
                    fmt=fmt,
                    tau=config.tau,
                    bbox=SPHERE_BBOX,
                    scalar_width=8,
                )
                rec = frame_to_dense(single, 0)
                frame_sq += float(np.sum((np.asarray(rec.data) - np.asarray(ref.data)) ** 2))
                ref_sq += float(np.sum(np.asarray(ref.data) ** 2))
            report, _ = evaluate_scene(
                scene,
                references,
                samples=config.samples,
                seed=config.seed,
            )
            true_rep = scene.report()
            padded_rep = scene.report(padded=True)
            rows.append(
                {
                    "format": fmt,
                    "max_rank": rank,
                    "parameter_count": true_rep.parameter_count,
                    "ratio_true": true_rep.compression_ratio,
                    "ratio_padded": padded_rep.compression_ratio,
                    "frame_stage_rel_error": float(np.sqrt(frame_sq / ref_sq)),
                    "l2": report.l2,
                    "iou": report.iou,
                    "hausdorff": report.hausdorff,
                    "chamfer": report.chamfer,
                    "seconds": elapsed,
                }
            )
    return rows
