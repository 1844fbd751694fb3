#!/usr/bin/env python3
"""Carve a sphere out of a voxel occupancy grid and repair the raw surface.

Samples an analytic sphere onto a 32^3 lattice, runs marching cubes at the
0.5 level set, then cleans the triangle soup (duplicate vertices, slivers,
non-manifold edges, dust components).  Writes the grid, the raw mesh, and
the cleaned mesh next to this script under out/01_carve_sphere/.
"""

from pathlib import Path

import numpy as np

from carvetex.carve import CleanParams, clean, marching_cubes, mesh_diagnostics
from carvetex.field import Sphere, sample_grid
from carvetex.io import write_obj, write_vox

OUT = Path(__file__).resolve().parent / "out" / "01_carve_sphere"


def show(label, diag):
    print(f"{label}: {diag['vertices']} vertices, {diag['faces']} faces, "
          f"{diag['components']} component(s), euler {diag['euler']}, "
          f"closed={diag['closed']}, volume {diag['volume']:.6f}")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    center, radius = (0.5, 0.5, 0.5), 0.3
    grid = sample_grid(Sphere(center=center, radius=radius),
                       dims=(32, 32, 32), origin=(0, 0, 0), spacing=1.0 / 31.0)
    print(f"sampled {grid.dims} grid, {int((grid.values > 0.5).sum())} voxels inside")
    write_vox(OUT / "sphere.vox", grid)

    raw = marching_cubes(grid, iso=0.5)
    show("raw surface", mesh_diagnostics(raw))
    write_obj(OUT / "raw.obj", raw)

    mesh = clean(raw, CleanParams())
    show("cleaned    ", mesh_diagnostics(mesh))
    write_obj(OUT / "cleaned.obj", mesh)

    r = np.linalg.norm(mesh.vertices - center, axis=1)
    print(f"radius of extracted vertices: {r.mean():.4f} mean "
          f"(target {radius}), max deviation {np.abs(r - radius).max():.4f} "
          f"(< one voxel spacing {grid.spacing:.4f})")
    ideal = 4.0 / 3.0 * np.pi * radius**3
    vol = mesh_diagnostics(mesh)["volume"]
    print(f"enclosed volume {vol:.6f} vs ideal {ideal:.6f} "
          f"({100 * vol / ideal:.1f}%)")
    print(f"artifacts in {OUT}")


if __name__ == "__main__":
    main()
