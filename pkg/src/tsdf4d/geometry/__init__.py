from .marching import marching_cubes
from .mesh import SceneBounds, TriangleMesh, load_mesh, sample_surface, save_obj, scene_bounds
from .voxelize import mesh_to_tsdf, winding_numbers

__all__ = [
    "TriangleMesh",
    "SceneBounds",
    "load_mesh",
    "save_obj",
    "sample_surface",
    "scene_bounds",
    "mesh_to_tsdf",
    "winding_numbers",
    "marching_cubes",
]
