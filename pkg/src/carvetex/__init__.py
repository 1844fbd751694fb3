"""carvetex: occupancy fields to clean, textured polygon meshes.

Submodules
----------
field        analytic and voxel occupancy fields
carve        isosurface extraction and mesh cleaning
mesh         the TriMesh container
remesh_tri   isotropic triangle remeshing
remesh_quad  orientation/position fields and quad extraction
paint        orthographic rasterization and texture back-projection
occlude      occlusion clustering, canvas inpainting, reprojection
attend       spatially decoupled cross-attention (numeric reference)
io           OBJ / PNG / voxel-grid file formats
pipeline     config-driven end-to-end runs behind the CLI
"""

from .attend import decoupled_pass
from .carve import CleanParams, clean, marching_cubes, mesh_diagnostics
from .errors import InvalidArgumentError, OutOfRangeError, ParseError
from .field import Box, Difference, GridField, Sphere, Torus, Union, sample_grid
from .mesh import TriMesh
from .occlude import InpaintParams, inpaint_occlusions
from .paint import backproject, build_atlas, default_cameras, untextured_faces
from .remesh_quad import QuadParams, quad_remesh
from .remesh_tri import RemeshParams, isotropic_remesh

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CleanParams",
    "Difference",
    "GridField",
    "InpaintParams",
    "InvalidArgumentError",
    "OutOfRangeError",
    "ParseError",
    "QuadParams",
    "RemeshParams",
    "Sphere",
    "Torus",
    "TriMesh",
    "Union",
    "__version__",
    "backproject",
    "build_atlas",
    "clean",
    "decoupled_pass",
    "default_cameras",
    "inpaint_occlusions",
    "isotropic_remesh",
    "marching_cubes",
    "mesh_diagnostics",
    "quad_remesh",
    "sample_grid",
    "untextured_faces",
]
