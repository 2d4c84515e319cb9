"""Frame sources: directories of raw volumes or mesh sequences.

A volume directory holds .npy files (one 3D array per frame, shared shape),
consumed in sorted filename order. A mesh directory holds .obj/.ply files; the
scene bounding box is the union over all frames plus a closing margin of twice
the truncation distance, and each frame is voxelized on that common grid.

The truncation distance can be given normalized (a fraction of the scene
box's longest edge, the default) or directly in world units.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .errors import ValidationError
from .geometry.mesh import SceneBounds, load_mesh, scene_bounds
from .geometry.voxelize import mesh_to_tsdf
from .tensors import DenseVolume

MESH_SUFFIXES = (".obj", ".ply")


@dataclass
class FrameSource:
    kind: str  # "volumes" | "meshes"
    paths: List[Path]
    resolution: int
    tau: float  # world units
    bounds: SceneBounds

    @property
    def frame_count(self) -> int:
        return len(self.paths)

    def volumes(self) -> Iterator[DenseVolume]:
        for p in self.paths:
            if self.kind == "volumes":
                arr = np.load(p)
                if arr.ndim != 3:
                    raise ValidationError(f"{p} holds a {arr.ndim}D array, expected 3D")
                yield DenseVolume(arr)
            else:
                yield mesh_to_tsdf(load_mesh(p), self.bounds, self.resolution, self.tau)


def _listing(input_dir: Path, suffixes) -> List[Path]:
    return sorted(p for p in input_dir.iterdir() if p.suffix.lower() in suffixes)


def open_source(
    input_dir,
    resolution: int = 64,
    tau: float = 0.05,
    tau_units: str = "normalized",
    bbox: Optional[Tuple] = None,
) -> FrameSource:
    """Inspect a directory and build a frame source from what it contains."""
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"input directory {input_dir} does not exist")
    if tau_units not in ("normalized", "world"):
        raise ValidationError(f"tau_units must be 'normalized' or 'world', got {tau_units!r}")

    volume_paths = _listing(input_dir, (".npy",))
    mesh_paths = _listing(input_dir, MESH_SUFFIXES)
    if volume_paths and mesh_paths:
        raise ValidationError(f"{input_dir} mixes volume and mesh files")

    if volume_paths:
        first = np.load(volume_paths[0], mmap_mode="r")
        if first.ndim != 3:
            raise ValidationError(f"{volume_paths[0]} holds a {first.ndim}D array, expected 3D")
        res = int(first.shape[0])
        if bbox is None:
            bounds = SceneBounds((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        else:
            bounds = SceneBounds(bbox[0], bbox[1])
        tau_world = tau * float(bounds.extent.max()) if tau_units == "normalized" else tau
        return FrameSource("volumes", volume_paths, res, tau_world, bounds)

    if mesh_paths:
        meshes = [load_mesh(p) for p in mesh_paths]
        raw = scene_bounds(meshes)
        tau_world = tau * float(raw.extent.max()) if tau_units == "normalized" else tau
        if bbox is not None:
            bounds = SceneBounds(bbox[0], bbox[1])
        else:
            bounds = SceneBounds(raw.min - 2 * tau_world, raw.max + 2 * tau_world)
        return FrameSource("meshes", mesh_paths, resolution, tau_world, bounds)

    raise ValidationError(f"no .npy, .obj, or .ply frames in {input_dir}")
