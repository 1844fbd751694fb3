#!/usr/bin/env python3
"""Texture a carved sphere by back-projecting four orthogonal camera views.

Renders checkerboard images from the four default side cameras, builds a
per-face texture atlas, and blends the views per texel with visibility
tests and normal-based confidence weighting.  Writes the views, the atlas,
and the textured OBJ under out/04_texture_backprojection/.
"""

from pathlib import Path

import numpy as np

from carvetex.carve import CleanParams, clean, marching_cubes
from carvetex.field import Sphere, sample_grid
from carvetex.io import write_obj, write_png
from carvetex.paint import backproject, build_atlas, default_cameras, untextured_faces
from carvetex.pipeline import generate_views, write_camera_sidecar
from carvetex.remesh_tri import RemeshParams, isotropic_remesh

OUT = Path(__file__).resolve().parent / "out" / "04_texture_backprojection"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    grid = sample_grid(Sphere(center=(0.5, 0.5, 0.5), radius=0.3),
                       dims=(32, 32, 32), origin=(0, 0, 0), spacing=1.0 / 31.0)
    mesh = clean(marching_cubes(grid, iso=0.5), CleanParams())
    mesh = isotropic_remesh(mesh, RemeshParams(target_edge_length=0.05, iterations=3))
    print(f"mesh: {mesh.n_faces} faces")

    cameras = default_cameras(mesh, resolution=(256, 256))
    print("cameras: azimuth " + ", ".join(f"{c.azimuth_deg:.0f}" for c in cameras)
          + " deg, elevation 0 deg")
    views = generate_views(mesh, cameras, "checker")
    for i, (cam, img) in enumerate(views):
        write_png(OUT / f"view{i}.png", img)
        write_camera_sidecar(OUT / f"view{i}.png.cam", cam)

    atlas = build_atlas(mesh, size=512, texel_density=32.0)
    valid = atlas.face_map >= 0
    print(f"atlas: 512x512, {int(valid.sum())} texels across {mesh.n_faces} faces")

    painted = backproject(mesh, atlas, views)
    textured = (painted.image[..., 3] == 255) & valid
    untex = untextured_faces(painted)
    print(f"back-projection: {int(textured.sum())} of {int(valid.sum())} texels "
          f"textured ({100.0 * textured.sum() / valid.sum():.1f}%), "
          f"{len(untex)} faces below coverage threshold")

    write_png(OUT / "atlas.png", painted.image)
    write_obj(OUT / "textured.obj", mesh, uv=painted.corner_uvs(),
              comments=("atlas: atlas.png",))
    print(f"artifacts in {OUT}")


if __name__ == "__main__":
    main()
