"""Reconstruction quality metrics between original and reconstructed geometry.

Volume metrics (l2, IoU) compare grids directly; point-set metrics (Hausdorff,
Chamfer) compare mesh vertex sets or surface samples. Occupancy for IoU is
value >= iso under the positive-inside convention. Chamfer is reported
mean-normalized per side by default (sample-size invariant); the raw summed
form is available with normalized=False, and reports label which was used.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .tensors import DenseVolume


def l2(a: DenseVolume, b: DenseVolume) -> float:
    """Frobenius norm of the difference."""
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(np.asarray(a.data, dtype=np.float64) - np.asarray(b.data, dtype=np.float64)))


def iou(a: DenseVolume, b: DenseVolume, iso: float = 0.0) -> float:
    """Occupancy intersection-over-union; 1.0 when both occupancies are empty."""
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    occ_a = np.asarray(a.data) >= iso
    occ_b = np.asarray(b.data) >= iso
    union = int(np.count_nonzero(occ_a | occ_b))
    if union == 0:
        return 1.0
    return float(np.count_nonzero(occ_a & occ_b) / union)


def _as_points(a) -> np.ndarray:
    pts = np.asarray(a, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise ValidationError("empty point set")
    return pts


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two point sets (exact, kd-tree)."""
    a = _as_points(a)
    b = _as_points(b)
    d_ab = cKDTree(b).query(a, k=1)[0].max()
    d_ba = cKDTree(a).query(b, k=1)[0].max()
    return float(max(d_ab, d_ba))


def chamfer(a, b, normalized: bool = True) -> float:
    """Symmetric Chamfer distance: summed squared nearest-neighbor distances
    both ways, each side divided by its sample count when `normalized`."""
    a = _as_points(a)
    b = _as_points(b)
    d_ab = cKDTree(b).query(a, k=1)[0]
    d_ba = cKDTree(a).query(b, k=1)[0]
    s_ab = float(np.sum(d_ab**2))
    s_ba = float(np.sum(d_ba**2))
    if normalized:
        return s_ab / len(a) + s_ba / len(b)
    return s_ab + s_ba


DEFAULT_SAMPLES = 30_000


@dataclass
class MetricReport:
    l2: float
    iou: float
    hausdorff: float
    chamfer: float
    frames_evaluated: List[int]
    chamfer_normalized: bool = True
    hausdorff_operands: str = "vertices"

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValidationError(f"IoU {self.iou} outside [0, 1]")
        if self.hausdorff < 0 or self.chamfer < 0:
            raise ValidationError("distances must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["l2", "iou", "hausdorff", "chamfer", "frames_evaluated"],
    "properties": {
        "l2": {"type": "number", "minimum": 0},
        "iou": {"type": "number", "minimum": 0, "maximum": 1},
        "hausdorff": {"type": "number", "minimum": 0},
        "chamfer": {"type": "number", "minimum": 0},
        "frames_evaluated": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "chamfer_normalized": {"type": "boolean"},
        "hausdorff_operands": {"type": "string"},
    },
    "additionalProperties": False,
}


def write_report_csv(reports: Sequence[dict], path) -> None:
    rows = list(reports)
    if not rows:
        raise ValidationError("no rows to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
