#!/usr/bin/env python3
"""Fill texture left blank by occlusion: a bowl cavity no side camera sees.

A bowl (sphere minus an offset inner sphere) is painted from the four side
cameras; the cavity faces stay untextured.  The inpainting stage clusters
those faces by normal and position, renders one tile per cluster from a
viewpoint that does see them, fills the blank pixels harmonically from the
surrounding texture, and writes the colors back to the atlas.  Artifacts go
to out/05_occlusion_inpainting/.
"""

from pathlib import Path

from carvetex.carve import CleanParams, clean, marching_cubes
from carvetex.field import Difference, Sphere, sample_grid
from carvetex.io import write_obj, write_png
from carvetex.occlude import InpaintParams, inpaint_occlusions
from carvetex.paint import backproject, build_atlas, default_cameras, untextured_faces
from carvetex.pipeline import generate_views
from carvetex.remesh_tri import RemeshParams, isotropic_remesh

OUT = Path(__file__).resolve().parent / "out" / "05_occlusion_inpainting"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    center, lift = (0.5, 0.5, 0.5), 0.12
    bowl = Difference(
        Sphere(center=center, radius=0.32),
        Sphere(center=(center[0], center[1], center[2] + lift), radius=0.28),
    )
    grid = sample_grid(bowl, dims=(48, 48, 48), origin=(0, 0, 0), spacing=1.0 / 47.0)
    mesh = clean(marching_cubes(grid, iso=0.5), CleanParams())
    mesh = isotropic_remesh(mesh, RemeshParams(target_edge_length=0.04, iterations=3))
    print(f"bowl mesh: {mesh.n_faces} faces")

    cameras = default_cameras(mesh, resolution=(256, 256))
    views = generate_views(mesh, cameras, "solid")
    atlas = build_atlas(mesh, size=512, texel_density=32.0)
    painted = backproject(mesh, atlas, views)
    write_png(OUT / "atlas_before.png", painted.image)

    blank = untextured_faces(painted)
    print(f"after side-view painting: {len(blank)} faces "
          f"({100.0 * len(blank) / mesh.n_faces:.1f}%) have no texture "
          f"(the upward-facing cavity)")

    report: dict = {}
    params = InpaintParams(k=4, tile_resolution=128)
    final = inpaint_occlusions(mesh, painted, params, report=report)
    for key, value in report.items():
        print(f"  {key} = {value}")

    valid = final.face_map >= 0
    textured = (final.image[..., 3] == 255) & valid
    print(f"after inpainting: {int(textured.sum())} of {int(valid.sum())} texels "
          f"textured ({100.0 * textured.sum() / valid.sum():.1f}%), "
          f"{len(untextured_faces(final))} blank faces remain")

    write_png(OUT / "atlas_after.png", final.image)
    write_obj(OUT / "textured.obj", mesh, uv=final.corner_uvs(),
              comments=("atlas: atlas_after.png",))
    print(f"artifacts in {OUT}")


if __name__ == "__main__":
    main()
