"""Shared fixtures: the canonical meshes most test modules reuse.

Everything expensive is session scoped so the carved sphere, the remeshed
sphere, and the painted bowl are built exactly once per run.  Construction
times are kept alongside the meshes because the acceptance tests assert
runtime budgets.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from carvetex import (
    Difference,
    RemeshParams,
    Sphere,
    backproject,
    build_atlas,
    clean,
    default_cameras,
    isotropic_remesh,
    marching_cubes,
    sample_grid,
)
from carvetex.mesh import TriMesh
from carvetex.pipeline import generate_views

SPHERE_CENTER = (0.5, 0.5, 0.5)
SPHERE_RADIUS = 0.3
GRID_N = 64
GRID_SPACING = 1.0 / (GRID_N - 1)
REMESH_ELL = 0.03


def build_plane(n: int, extent: float = 1.0) -> TriMesh:
    """n x n vertex lattice in the z = 0 plane, two CCW (+z) triangles per cell."""
    xs = np.linspace(0.0, extent, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(n * n)])
    idx = np.arange(n * n).reshape(n, n)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    faces = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return TriMesh(verts, faces)


def bowl_field() -> Difference:
    # Sphere with a smaller sphere cut from above: the cavity is invisible
    # from all four side-on cameras.
    return Difference(
        Sphere(center=SPHERE_CENTER, radius=0.32),
        Sphere(center=(0.5, 0.5, 0.62), radius=0.28),
    )


@pytest.fixture(scope="session")
def plane():
    return build_plane


@pytest.fixture(scope="session")
def sphere_grid():
    field = Sphere(center=SPHERE_CENTER, radius=SPHERE_RADIUS)
    return sample_grid(field, (GRID_N, GRID_N, GRID_N), (0.0, 0.0, 0.0), GRID_SPACING)


@pytest.fixture(scope="session")
def sphere_carve(sphere_grid):
    start = time.perf_counter()
    mesh = clean(marching_cubes(sphere_grid, iso=0.5))
    return mesh, time.perf_counter() - start


@pytest.fixture(scope="session")
def sphere_mesh(sphere_carve):
    return sphere_carve[0]


@pytest.fixture(scope="session")
def sphere_remesh(sphere_mesh):
    params = RemeshParams(target_edge_length=REMESH_ELL, iterations=5)
    start = time.perf_counter()
    mesh = isotropic_remesh(sphere_mesh, params)
    return mesh, time.perf_counter() - start


@pytest.fixture(scope="session")
def remeshed_sphere(sphere_remesh):
    return sphere_remesh[0]


@pytest.fixture(scope="session")
def bowl_mesh():
    grid = sample_grid(bowl_field(), (GRID_N, GRID_N, GRID_N), (0.0, 0.0, 0.0), GRID_SPACING)
    return clean(marching_cubes(grid, iso=0.5))


@pytest.fixture(scope="session")
def bowl_painted(bowl_mesh):
    """Bowl atlas after back-projecting four solid-color side views."""
    cameras = default_cameras(bowl_mesh)
    views = generate_views(bowl_mesh, cameras, "solid")
    atlas = build_atlas(bowl_mesh, size=1024)
    return backproject(bowl_mesh, atlas, views)
