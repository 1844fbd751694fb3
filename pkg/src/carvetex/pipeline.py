"""Config-driven orchestration: carve, remesh, paint, inpaint, end to end.

The config is INI-style key=value under section headers.  Every stage
writes plain-text key=value stats next to its outputs; timing goes to
stdout only, so repeated runs with the same config and seed produce
byte-identical files.

    [field]
    source = sphere            ; sphere | box | torus | vox
    center = 0.5 0.5 0.5
    radius = 0.3
    dims = 64 64 64
    origin = 0 0 0
    spacing = 0.015873

    [carve]
    iso = 0.5

    [remesh]
    mode = tri                 ; tri | quad | none
    target_edge_length = 0.03
    iterations = 5
    smoothing = 0.5

    [paint]
    resolution = 512
    atlas_size = 1024
    generator = solid          ; solid | checker | normals, or views = paths
    colors = ff0000 00ff00 0000ff ffff00

    [inpaint]
    k = 6

    [output]
    dir = out

    [run]
    seed = 0
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path

import numpy as np

from . import io as cio
from .carve import CleanParams, clean, marching_cubes, mesh_diagnostics
from .errors import InvalidArgumentError, ParseError
from .field import Box, Difference, GridField, Sphere, Torus, sample_grid
from .mesh import TriMesh
from .occlude import InpaintParams, inpaint_occlusions
from .paint import (
    BackprojectParams,
    Camera,
    TextureAtlas,
    assemble_atlas,
    backproject,
    build_atlas,
    default_cameras,
    rasterize,
    untextured_faces,
)
from .remesh_quad import QuadParams, quad_remesh
from .remesh_tri import RemeshParams, isotropic_remesh

__all__ = [
    "PipelineConfig",
    "load_config",
    "cmd_carve",
    "cmd_remesh",
    "cmd_paint",
    "cmd_inpaint",
    "cmd_pipeline",
    "generate_views",
    "write_camera_sidecar",
    "read_camera_sidecar",
    "write_atlas_layout",
    "read_atlas_layout",
]


class PipelineConfig:
    """Typed access to the parsed config with errors naming section.key."""

    def __init__(self, parser: configparser.ConfigParser, base_dir: Path):
        self._parser = parser
        self.base_dir = base_dir

    def has(self, section: str, key: str) -> bool:
        return self._parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None, required=False):
        if not self._parser.has_option(section, key):
            if required:
                raise InvalidArgumentError(f"missing config key [{section}] {key}")
            return default
        return self._parser.get(section, key)

    def _convert(self, section, key, value, kind):
        try:
            return kind(value)
        except ValueError as exc:
            raise InvalidArgumentError(f"bad value for [{section}] {key}: {value}") from exc

    def get_str(self, section, key, default=None, required=False):
        return self.raw(section, key, default, required)

    def get_int(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        return default if v is None else self._convert(section, key, v, int)

    def get_float(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        return default if v is None else self._convert(section, key, v, float)

    def get_floats(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        return tuple(self._convert(section, key, part, float) for part in v.split())

    def get_ints(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        return tuple(self._convert(section, key, part, int) for part in v.split())

    def get_path(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    def override(self, dotted: str, value: str) -> None:
        if "." not in dotted:
            raise InvalidArgumentError(f"override must be section.key, got {dotted}")
        section, key = dotted.split(".", 1)
        if not self._parser.has_section(section):
            self._parser.add_section(section)
        self._parser.set(section, key, value)


def load_config(path, overrides=()) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise InvalidArgumentError(f"cannot parse config {path}: {exc}") from exc
    cfg = PipelineConfig(parser, path.parent.resolve())
    for item in overrides:
        if "=" not in item:
            raise InvalidArgumentError(f"override must be section.key=value, got {item}")
        dotted, value = item.split("=", 1)
        cfg.override(dotted.strip(), value.strip())
    return cfg


def write_stats(path, stats: dict) -> None:
    lines = []
    for key, value in stats.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = f"{value:.9g}"
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_stats(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


# -- field construction --------------------------------------------------------


def make_grid(cfg: PipelineConfig) -> GridField:
    source = cfg.get_str("field", "source", required=True)
    if source == "vox":
        path = cfg.get_path("field", "path", required=True)
        if not Path(path).is_file():
            raise InvalidArgumentError(f"voxel file not found: {path}")
        return cio.read_vox(path)
    center = cfg.get_floats("field", "center", (0.5, 0.5, 0.5))
    if source == "sphere":
        analytic = Sphere(center=center, radius=cfg.get_float("field", "radius", 0.3))
    elif source == "box":
        analytic = Box(center=center,
                       half_extents=cfg.get_floats("field", "half_extents", (0.25, 0.25, 0.25)))
    elif source == "torus":
        analytic = Torus(center=center,
                         major_radius=cfg.get_float("field", "major_radius", 0.25),
                         minor_radius=cfg.get_float("field", "minor_radius", 0.1))
    elif source == "bowl":
        radius = cfg.get_float("field", "radius", 0.32)
        inner = cfg.get_float("field", "inner_radius", 0.28)
        lift = cfg.get_float("field", "lift", 0.12)
        cut_center = (center[0], center[1], center[2] + lift)
        analytic = Difference(Sphere(center=center, radius=radius),
                              Sphere(center=cut_center, radius=inner))
    else:
        raise InvalidArgumentError(f"unknown field source: {source}")
    dims = cfg.get_ints("field", "dims", (64, 64, 64))
    origin = cfg.get_floats("field", "origin", (0.0, 0.0, 0.0))
    if cfg.has("field", "spacing"):
        spacing = cfg.get_float("field", "spacing")
    else:
        spacing = 1.0 / (max(dims) - 1)
    return sample_grid(analytic, dims, origin, spacing)


# -- procedural views ----------------------------------------------------------

_DEFAULT_COLORS = ((255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0))


def _parse_colors(text: str | None):
    if text is None:
        return _DEFAULT_COLORS
    colors = []
    for token in text.split():
        token = token.lstrip("#")
        if len(token) != 6:
            raise InvalidArgumentError(f"colors must be 6-digit hex, got {token}")
        colors.append(tuple(int(token[i : i + 2], 16) for i in (0, 2, 4)))
    if not colors:
        raise InvalidArgumentError("colors list is empty")
    return tuple(colors)


def generate_views(mesh: TriMesh, cameras: list[Camera], kind: str, colors=None):
    """Procedural per-camera RGBA images: solid fills, checkerboards, or a
    normal-shaded render of the mesh itself."""
    colors = colors or _DEFAULT_COLORS
    views = []
    for i, cam in enumerate(cameras):
        w, h = cam.resolution
        img = np.zeros((h, w, 4), dtype=np.uint8)
        img[..., 3] = 255
        color = colors[i % len(colors)]
        if kind == "solid":
            img[..., :3] = color
        elif kind == "checker":
            cell = max(min(w, h) // 16, 1)
            yy, xx = np.meshgrid(np.arange(h) // cell, np.arange(w) // cell, indexing="ij")
            board = (yy + xx) % 2 == 0
            img[board, :3] = color
            img[~board, :3] = 255 - np.array(color, dtype=np.uint8)
        elif kind == "normals":
            buf = rasterize(mesh, cam)
            shade = np.clip((buf.normal + 1.0) * 0.5 * 255.0, 0, 255).astype(np.uint8)
            present = buf.face_id >= 0
            img[present, :3] = shade[present]
            img[~present, :3] = 0
        else:
            raise InvalidArgumentError(f"unknown view generator: {kind}")
        views.append((cam, img))
    return views


# -- sidecars ------------------------------------------------------------------


def write_camera_sidecar(path, camera: Camera) -> None:
    write_stats(path, {
        "azimuth_deg": float(camera.azimuth_deg),
        "elevation_deg": float(camera.elevation_deg),
        "ortho_scale": float(camera.ortho_scale),
        "width": camera.resolution[0],
        "height": camera.resolution[1],
    })


def read_camera_sidecar(path, mesh: TriMesh) -> Camera:
    """Rebuild a camera from a sidecar; framing (target, distance) comes
    from the mesh like default_cameras."""
    data = read_stats(path)
    try:
        az = float(data["azimuth_deg"])
        el = float(data["elevation_deg"])
        scale = float(data["ortho_scale"])
        res = (int(data["width"]), int(data["height"]))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad camera sidecar {path}: {exc}") from exc
    lo, hi = mesh.bbox()
    center = (lo + hi) / 2.0
    distance = max(mesh.bbox_diagonal, 1e-6) * 2.0
    return Camera(az, el, scale, res, look_at=center, eye_distance=distance)


def write_atlas_layout(path, atlas: TextureAtlas) -> None:
    lines = [
        f"width {atlas.image.shape[1]}",
        f"height {atlas.image.shape[0]}",
        f"density {atlas.texel_density!r}",
        f"faces {len(atlas.face_size)}",
    ]
    for f in range(len(atlas.face_size)):
        lines.append(
            f"face {f} {atlas.face_origin[f, 0]} {atlas.face_origin[f, 1]} {atlas.face_size[f]}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_atlas_layout(path, image: np.ndarray) -> TextureAtlas:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    header = {}
    rows = []
    for n, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "face":
            if len(parts) != 5:
                raise ParseError("malformed face record", line=n)
            rows.append(tuple(int(p) for p in parts[1:]))
        elif len(parts) == 2:
            header[parts[0]] = parts[1]
        else:
            raise ParseError(f"unrecognized layout line: {line}", line=n)
    try:
        count = int(header["faces"])
        density = float(header.get("density", "0"))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad layout header: {exc}") from exc
    if len(rows) != count or any(r[0] != i for i, r in enumerate(rows)):
        raise ParseError("layout face records out of order or missing")
    origins = np.array([[r[1], r[2]] for r in rows], dtype=np.int64).reshape(-1, 2)
    sizes = np.array([r[3] for r in rows], dtype=np.int64)
    return assemble_atlas(image, origins, sizes, density)


# -- stage commands ------------------------------------------------------------


def _out_dir(cfg: PipelineConfig) -> Path:
    out = cfg.get_path("output", "dir", cfg.base_dir / "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _remesh_params(cfg: PipelineConfig) -> RemeshParams:
    return RemeshParams(
        target_edge_length=cfg.get_float("remesh", "target_edge_length", 0.03),
        iterations=cfg.get_int("remesh", "iterations", 5),
        smoothing=cfg.get_float("remesh", "smoothing", 0.5),
    )


def cmd_carve(cfg: PipelineConfig) -> dict:
    """Field to cleaned, remeshed OBJ plus stats; returns the stats."""
    out = _out_dir(cfg)
    grid = make_grid(cfg)
    iso = cfg.get_float("carve", "iso", 0.5)
    mesh = marching_cubes(grid, iso=iso)
    raw_faces = mesh.n_faces
    mesh = clean(mesh, CleanParams(
        min_component_fraction=cfg.get_float("carve", "min_component_fraction", 0.02)
    ))
    mode = cfg.get_str("remesh", "mode", "tri")
    if mode not in ("tri", "quad", "none"):
        raise InvalidArgumentError(f"unknown remesh mode: {mode}")
    if mode != "none":
        mesh = isotropic_remesh(mesh, _remesh_params(cfg))
    stats = {"raw_faces": raw_faces, "iso": iso}
    stats.update(mesh_diagnostics(mesh))
    cio.write_obj(out / "mesh.obj", mesh)
    if mode == "quad":
        ell = cfg.get_float("remesh", "target_edge_length", 0.03)
        rho = cfg.get_float("remesh", "rho", 2.0 * ell)
        params = QuadParams(
            rho=rho,
            orientation_sweeps=cfg.get_int("remesh", "orientation_sweeps", 100),
            position_sweeps=cfg.get_int("remesh", "position_sweeps", 100),
        )
        quad = quad_remesh(mesh, params)
        cio.write_obj(out / "quad.obj", quad)
        stats["quad_faces"] = int(quad.n_faces)
        stats["quad_tris"] = int(len(quad.tris))
        stats["quad_irregular"] = int(len(quad.irregular_vertices))
    write_stats(out / "carve_stats.txt", stats)
    return stats


def cmd_remesh(cfg: PipelineConfig) -> dict:
    """Remesh an existing OBJ ([remesh] input) and report diagnostics."""
    out = _out_dir(cfg)
    src = cfg.get_path("remesh", "input", required=True)
    if not Path(src).is_file():
        raise InvalidArgumentError(f"input mesh not found: {src}")
    mesh, _uv = cio.load_trimesh(src)
    before = mesh_diagnostics(mesh)
    mesh = isotropic_remesh(mesh, _remesh_params(cfg))
    stats = {f"input_{k}": v for k, v in before.items()}
    stats.update(mesh_diagnostics(mesh))
    cio.write_obj(out / "remeshed.obj", mesh)
    write_stats(out / "remesh_stats.txt", stats)
    return stats


def _load_views(cfg: PipelineConfig, mesh: TriMesh, cameras: list[Camera]):
    views_value = cfg.get_str("paint", "views")
    generator = cfg.get_str("paint", "generator")
    if views_value:
        views = []
        for token in views_value.split():
            img_path = Path(token)
            if not img_path.is_absolute():
                img_path = cfg.base_dir / img_path
            if not img_path.is_file():
                raise InvalidArgumentError(f"view image not found: {img_path}")
            sidecar = img_path.with_suffix(img_path.suffix + ".cam")
            if not sidecar.is_file():
                raise InvalidArgumentError(f"camera sidecar not found: {sidecar}")
            cam = read_camera_sidecar(sidecar, mesh)
            views.append((cam, cio.read_png(img_path)))
        return views
    if generator:
        colors = _parse_colors(cfg.get_str("paint", "colors"))
        return generate_views(mesh, cameras, generator, colors)
    raise InvalidArgumentError(
        "missing config key [paint] views or [paint] generator"
    )


def _inpaint_params(cfg: PipelineConfig) -> InpaintParams:
    return InpaintParams(
        k=cfg.get_int("inpaint", "k", 6),
        position_weight=cfg.get_float("inpaint", "position_weight", 1.0),
        tile_resolution=cfg.get_int("inpaint", "tile_resolution", 256),
        seed=cfg.get_int("run", "seed", 0),
        coverage_threshold=cfg.get_float("inpaint", "coverage_threshold", 0.5),
    )


def cmd_paint(cfg: PipelineConfig, mesh: TriMesh | None = None) -> dict:
    """Texture a mesh: views -> back-projection -> occlusion inpainting."""
    out = _out_dir(cfg)
    if mesh is None:
        src = cfg.get_path("paint", "mesh", out / "mesh.obj")
        if not Path(src).is_file():
            raise InvalidArgumentError(f"mesh not found: {src} (run carve first?)")
        mesh, _uv = cio.load_trimesh(src)
    resolution = cfg.get_int("paint", "resolution", 512)
    cameras = default_cameras(mesh, (resolution, resolution))
    views = _load_views(cfg, mesh, cameras)
    atlas = build_atlas(
        mesh,
        size=cfg.get_int("paint", "atlas_size", 1024),
        texel_density=cfg.get_float("paint", "texel_density", 64.0),
    )
    bp = BackprojectParams(
        beta=cfg.get_float("paint", "beta", 4.0),
        side_suppression=cfg.get_float("paint", "side_suppression", 0.7),
    )
    coarse = backproject(mesh, atlas, views, bp)
    untex_before = len(untextured_faces(coarse))
    report: dict = {}
    final = inpaint_occlusions(mesh, coarse, _inpaint_params(cfg), report=report)

    valid = final.face_map >= 0
    textured = (final.image[..., 3] == 255) & valid
    stats = {
        "faces": mesh.n_faces,
        "atlas_texels": int(valid.sum()),
        "textured_texels": int(textured.sum()),
        "coverage": float(textured.sum() / max(valid.sum(), 1)),
        "untextured_faces_before_inpaint": untex_before,
    }
    stats.update(report)
    cio.write_obj(out / "textured.obj", mesh, uv=final.corner_uvs(),
                  comments=("atlas: atlas.png",))
    cio.write_png(out / "atlas.png", final.image)
    write_atlas_layout(out / "atlas_layout.txt", final)
    for i, (cam, img) in enumerate(views):
        cio.write_png(out / f"view{i}.png", img)
        write_camera_sidecar(out / f"view{i}.png.cam", cam)
    write_stats(out / "paint_stats.txt", stats)
    return stats


def cmd_inpaint(cfg: PipelineConfig) -> dict:
    """Re-run occlusion inpainting on a saved atlas + layout sidecar."""
    out = _out_dir(cfg)
    mesh_path = cfg.get_path("inpaint", "mesh", out / "textured.obj")
    atlas_path = cfg.get_path("inpaint", "atlas", out / "atlas.png")
    layout_path = cfg.get_path("inpaint", "layout", out / "atlas_layout.txt")
    for p in (mesh_path, atlas_path, layout_path):
        if not Path(p).is_file():
            raise InvalidArgumentError(f"required input not found: {p}")
    mesh, _uv = cio.load_trimesh(mesh_path)
    atlas = read_atlas_layout(layout_path, cio.read_png(atlas_path))
    if len(atlas.face_size) != mesh.n_faces:
        raise InvalidArgumentError("atlas layout does not match the mesh")
    report: dict = {}
    final = inpaint_occlusions(mesh, atlas, _inpaint_params(cfg), report=report)
    cio.write_png(out / "atlas_inpainted.png", final.image)
    write_stats(out / "inpaint_stats.txt", report)
    return report


def cmd_pipeline(cfg: PipelineConfig) -> dict:
    """carve then paint; returns merged stats."""
    out = _out_dir(cfg)
    carve_stats = cmd_carve(cfg)
    mesh, _uv = cio.load_trimesh(out / "mesh.obj")
    paint_stats = cmd_paint(cfg, mesh=mesh)
    return {**{f"carve_{k}": v for k, v in carve_stats.items()},
            **{f"paint_{k}": v for k, v in paint_stats.items()}}


def cmd_attend_demo(out_dir, n_views=4, size=16, channels=8, tokens=3, seed=0) -> dict:
    """Seeded decoupled-attention demo; writes grayscale PNG visualizations."""
    from .attend import (AttentionWeights, RegionLayout, assemble_guidance,
                         decoupled_cross_attention, replicate_hidden, decoupled_pass)

    if channels % 2:
        raise InvalidArgumentError("channels must be even")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(channels, size, size))
    views = [
        (rng.normal(size=(channels // 2, tokens)), rng.normal(size=(channels // 2, tokens)))
        for _ in range(n_views)
    ]
    weights = AttentionWeights.seeded(channels // 2, seed=seed)
    layout = RegionLayout.grid(n_views, size, size)

    def to_png(path, arr):
        arr = np.asarray(arr, dtype=np.float64)
        lo, hi = float(arr.min()), float(arr.max())
        scaled = np.zeros_like(arr) if hi <= lo else (arr - lo) / (hi - lo)
        gray = np.rint(scaled * 255).astype(np.uint8)
        rgba = np.stack([gray, gray, gray, np.full_like(gray, 255)], axis=-1)
        cio.write_png(path, rgba)

    h_rep = replicate_hidden(h, n_views)
    guidance = assemble_guidance(views)
    half = channels // 2
    # Per-group attention maps: softmax weight of each spatial token on
    # guidance token 0, reshaped to the canvas.
    for g in range(2 * n_views):
        rows = slice(g * half, (g + 1) * half)
        q = h_rep[rows].reshape(half, size * size).T @ weights.wq
        k = guidance[rows].T @ weights.wk
        logits = q @ k.T / np.sqrt(half)
        att = np.exp(logits - logits.max(axis=1, keepdims=True))
        att /= att.sum(axis=1, keepdims=True)
        to_png(out / f"attention_group{g}_token0.png", att[:, 0].reshape(size, size))
    z = decoupled_cross_attention(h_rep, guidance, weights)
    to_png(out / "attended_channel0.png", z[0])
    result = decoupled_pass(h, views, layout, weights)
    to_png(out / "aggregated_channel0.png", result[0])
    region = np.zeros((size, size))
    for i, (x0, y0, rw, rh) in enumerate(layout.rects):
        region[x0 : x0 + rw, y0 : y0 + rh] = i
    to_png(out / "regions.png", region)
    return {"groups": 2 * n_views, "outputs": 2 * n_views + 3}
