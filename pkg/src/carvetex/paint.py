"""Orthographic view rendering and confidence-weighted texture back-projection.

The texture atlas gives every face its own square texel block: a face with
block size s holds the texels whose barycentric coordinates (a, b) =
((ix + 0.5) / s, (iy + 0.5) / s) satisfy a + b <= 1, so even s = 1 keeps
one texel (the edge midpoint).  Blocks are shelf-packed with a 2-texel
gutter.  The atlas alpha channel doubles as the texel flag: 0 background,
128 untextured, 255 textured.

Back-projection samples every view a texel's surface point is visible in
(its camera depth within a small bias of the rasterized depth buffer) and
blends the sampled colors with weights priority * confidence^beta, where
confidence is the face-normal/view cosine and side views are suppressed
where a front or back view already sees the face well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import InvalidArgumentError
from .mesh import TriMesh

__all__ = [
    "Camera",
    "RenderBuffers",
    "TextureAtlas",
    "BackprojectParams",
    "default_cameras",
    "rasterize",
    "confidence",
    "build_atlas",
    "assemble_atlas",
    "backproject",
    "untextured_faces",
]


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise InvalidArgumentError("zero-length direction")
    return v / n


@dataclass(frozen=True)
class Camera:
    """Orthographic camera aimed at `look_at` from azimuth/elevation.

    Azimuth 0 puts the camera on the +y side looking along -y, azimuth 90
    on the +x side; elevation raises it toward +z.  `ortho_scale` is the
    world width of the image; pixels are square, so the vertical span is
    ortho_scale * height / width.
    """

    azimuth_deg: float
    elevation_deg: float
    ortho_scale: float
    resolution: tuple[int, int]
    look_at: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))
    eye_distance: float = 1.0

    def __post_init__(self):
        w, h = self.resolution
        if w < 16 or h < 16:
            raise InvalidArgumentError("resolution must be at least 16x16")
        if not self.ortho_scale > 0:
            raise InvalidArgumentError("ortho_scale must be positive")
        if not self.eye_distance > 0:
            raise InvalidArgumentError("eye_distance must be positive")
        object.__setattr__(self, "look_at", np.asarray(self.look_at, dtype=np.float64))

    @property
    def outward(self) -> np.ndarray:
        """Unit vector from the target toward the camera."""
        az = math.radians(self.azimuth_deg)
        el = math.radians(self.elevation_deg)
        return np.array(
            [math.sin(az) * math.cos(el), math.cos(az) * math.cos(el), math.sin(el)]
        )

    @property
    def direction(self) -> np.ndarray:
        """Unit view direction (camera toward scene)."""
        return -self.outward

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Right and up vectors of the image plane (orthonormal with d)."""
        d = self.direction
        up_hint = np.array([0.0, 0.0, 1.0])
        if abs(d @ up_hint) > 0.999:
            up_hint = np.array([1.0, 0.0, 0.0])
        right = _unit(np.cross(d, up_hint))
        up = np.cross(right, d)
        return right, up

    @property
    def eye(self) -> np.ndarray:
        return self.look_at + self.outward * self.eye_distance

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map world points to (pixel x, pixel y, depth along the view)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        right, up = self.basis
        w, _h = self.resolution
        rel = pts - self.look_at
        scale = w / self.ortho_scale
        px = w / 2.0 + (rel @ right) * scale
        py = self.resolution[1] / 2.0 - (rel @ up) * scale
        depth = (pts - self.eye) @ self.direction
        return px, py, depth


@dataclass
class RenderBuffers:
    """Per-pixel rasterization output; background rows carry face_id -1."""

    depth: np.ndarray
    face_id: np.ndarray
    normal: np.ndarray
    bary: np.ndarray


def default_cameras(mesh: TriMesh, resolution=(512, 512)) -> list[Camera]:
    """Four orthogonal side-on cameras at azimuths 0, 90, 180, 270.

    Each camera frames the mesh bounding box with 10% margin; a camera
    whose projected extent degenerates falls back to the largest box
    extent, then to 1.
    """
    lo, hi = mesh.bbox()
    center = (lo + hi) / 2.0
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    distance = max(mesh.bbox_diagonal, 1e-6) * 2.0
    cams = []
    for az in (0.0, 90.0, 180.0, 270.0):
        probe = Camera(az, 0.0, 1.0, resolution, look_at=center, eye_distance=distance)
        right, up = probe.basis
        rel = corners - center
        ext = max(np.ptp(rel @ right), np.ptp(rel @ up))
        scale = 1.1 * ext
        if not scale > 0:
            scale = 1.1 * float((hi - lo).max())
        if not scale > 0:
            scale = 1.0
        cams.append(Camera(az, 0.0, scale, resolution, look_at=center, eye_distance=distance))
    return cams


def rasterize(mesh: TriMesh, camera: Camera) -> RenderBuffers:
    """Orthographic depth-buffer rasterization with pixel centers at +0.5.

    Faces are processed in index order with a strict depth test, so equal
    depths resolve to the lower face index regardless of input order.
    """
    w, h = camera.resolution
    depth = np.full((h, w), np.inf)
    face_id = np.full((h, w), -1, dtype=np.int64)
    normal = np.zeros((h, w, 3))
    bary = np.zeros((h, w, 3))
    if mesh.n_faces == 0:
        return RenderBuffers(depth, face_id, normal, bary)

    px, py, pz = camera.project(mesh.vertices)
    tri_x = px[mesh.faces]
    tri_y = py[mesh.faces]
    tri_z = pz[mesh.faces]
    normals = mesh.face_normals

    # Signed double area of the projected triangle; zero means edge-on.
    det = (tri_x[:, 1] - tri_x[:, 0]) * (tri_y[:, 2] - tri_y[:, 0]) - (
        tri_x[:, 2] - tri_x[:, 0]
    ) * (tri_y[:, 1] - tri_y[:, 0])

    x_lo = np.maximum(np.ceil(tri_x.min(axis=1) - 0.5), 0).astype(np.int64)
    x_hi = np.minimum(np.floor(tri_x.max(axis=1) - 0.5), w - 1).astype(np.int64)
    y_lo = np.maximum(np.ceil(tri_y.min(axis=1) - 0.5), 0).astype(np.int64)
    y_hi = np.minimum(np.floor(tri_y.max(axis=1) - 0.5), h - 1).astype(np.int64)

    for f in range(mesh.n_faces):
        if det[f] == 0 or x_lo[f] > x_hi[f] or y_lo[f] > y_hi[f]:
            continue
        xs = np.arange(x_lo[f], x_hi[f] + 1) + 0.5
        ys = np.arange(y_lo[f], y_hi[f] + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        dx0, dy0 = gx - tri_x[f, 0], gy - tri_y[f, 0]
        inv = 1.0 / det[f]
        la = ((tri_y[f, 2] - tri_y[f, 0]) * dx0 - (tri_x[f, 2] - tri_x[f, 0]) * dy0) * inv
        lb = (-(tri_y[f, 1] - tri_y[f, 0]) * dx0 + (tri_x[f, 1] - tri_x[f, 0]) * dy0) * inv
        l0 = 1.0 - la - lb
        inside = (la >= 0) & (lb >= 0) & (l0 >= 0)
        if not inside.any():
            continue
        z = l0 * tri_z[f, 0] + la * tri_z[f, 1] + lb * tri_z[f, 2]
        rows = slice(y_lo[f], y_hi[f] + 1)
        cols = slice(x_lo[f], x_hi[f] + 1)
        win = depth[rows, cols]
        hit = inside & (z < win)
        if not hit.any():
            continue
        win[hit] = z[hit]
        face_id[rows, cols][hit] = f
        normal[rows, cols][hit] = normals[f]
        bwin = bary[rows, cols]
        bwin[hit, 0] = l0[hit]
        bwin[hit, 1] = la[hit]
        bwin[hit, 2] = lb[hit]
    return RenderBuffers(depth, face_id, normal, bary)


def confidence(mesh: TriMesh, camera: Camera) -> np.ndarray:
    """Per-face view confidence clamp(dot(-d, n), 0, 1)."""
    return np.clip(mesh.face_normals @ (-camera.direction), 0.0, 1.0)


# -- texture atlas -------------------------------------------------------------

_ALPHA_BACKGROUND = 0
_ALPHA_UNTEXTURED = 128
_ALPHA_TEXTURED = 255

_GUTTER = 2


@dataclass
class TextureAtlas:
    """Per-face block atlas; alpha encodes 0/128/255 = background/untextured/textured."""

    image: np.ndarray
    face_origin: np.ndarray
    face_size: np.ndarray
    face_map: np.ndarray
    bary: np.ndarray
    texel_density: float

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[1], self.image.shape[0]

    def copy(self) -> "TextureAtlas":
        return TextureAtlas(
            image=self.image.copy(),
            face_origin=self.face_origin,
            face_size=self.face_size,
            face_map=self.face_map,
            bary=self.bary,
            texel_density=self.texel_density,
        )

    def corner_uvs(self) -> np.ndarray:
        """Per-face-corner UVs (F, 3, 2) in OBJ convention (v up from bottom)."""
        w = self.image.shape[1]
        h = self.image.shape[0]
        ox = self.face_origin[:, 0].astype(np.float64)
        oy = self.face_origin[:, 1].astype(np.float64)
        s = self.face_size.astype(np.float64)
        uv = np.zeros((len(s), 3, 2))
        uv[:, 0] = np.column_stack([ox / w, 1.0 - oy / h])
        uv[:, 1] = np.column_stack([(ox + s) / w, 1.0 - oy / h])
        uv[:, 2] = np.column_stack([ox / w, 1.0 - (oy + s) / h])
        return uv

    def texel_of(self, face: np.ndarray, a: np.ndarray, b: np.ndarray):
        """Nearest valid texel (col, row) for barycentric (a, b) on `face`.

        With a + b <= 1 the floor texel overshoots the block diagonal
        (ix + iy <= s - 1) by at most one step, fixed on the larger axis.
        """
        s = self.face_size[face]
        ix = np.clip(np.floor(a * s).astype(np.int64), 0, s - 1)
        iy = np.clip(np.floor(b * s).astype(np.int64), 0, s - 1)
        over = (ix + iy) > (s - 1)
        dec_x = over & (ix >= iy)
        ix = ix - dec_x
        iy = iy - (over & ~dec_x)
        return self.face_origin[face, 0] + ix, self.face_origin[face, 1] + iy


def _pack_blocks(sizes: np.ndarray, width: int, height: int):
    """Shelf-pack square blocks (descending size); None if they do not fit."""
    order = np.lexsort((np.arange(len(sizes)), -sizes))
    origins = np.zeros((len(sizes), 2), dtype=np.int64)
    x = y = shelf = 0
    for f in order:
        s = int(sizes[f])
        if s + 2 * _GUTTER > width or s + 2 * _GUTTER > height:
            return None
        if x + s + _GUTTER > width - _GUTTER:
            y += shelf + _GUTTER
            x = 0
            shelf = 0
        if y + s + _GUTTER > height - _GUTTER:
            return None
        origins[f] = (x + _GUTTER, y + _GUTTER)
        x += s + _GUTTER
        shelf = max(shelf, s)
    return origins


def _fill_texel_maps(origins: np.ndarray, sizes: np.ndarray, width: int, height: int):
    """Texel->face and texel->barycentric maps for packed blocks."""
    face_map = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3), dtype=np.float32)
    for f in range(len(sizes)):
        s = int(sizes[f])
        ox, oy = origins[f]
        axis = (np.arange(s) + 0.5) / s
        a, b = np.meshgrid(axis, axis)
        valid = a + b <= 1.0
        rows, cols = np.nonzero(valid)
        face_map[oy + rows, ox + cols] = f
        bary[oy + rows, ox + cols, 0] = 1.0 - a[valid] - b[valid]
        bary[oy + rows, ox + cols, 1] = a[valid]
        bary[oy + rows, ox + cols, 2] = b[valid]
    return face_map, bary


def build_atlas(mesh: TriMesh, size: int = 1024, texel_density: float = 64.0) -> TextureAtlas:
    """Allocate per-face texel blocks of side ceil(sqrt(area) * density).

    The density shrinks geometrically until the blocks pack into the
    requested square image; every face keeps at least one texel.
    """
    if size < 16 or size > 4096:
        raise InvalidArgumentError("atlas size must be in [16, 4096]")
    if not texel_density > 0:
        raise InvalidArgumentError("texel_density must be positive")
    root_area = np.sqrt(mesh.face_areas)
    density = float(texel_density)
    for _ in range(200):
        sizes = np.maximum(np.ceil(root_area * density), 1).astype(np.int64)
        origins = _pack_blocks(sizes, size, size)
        if origins is not None:
            break
        if sizes.max() == 1:
            raise InvalidArgumentError(
                f"atlas {size}x{size} cannot hold {mesh.n_faces} faces"
            )
        density *= 0.84
    else:
        raise InvalidArgumentError("atlas packing did not converge")

    face_map, bary = _fill_texel_maps(origins, sizes, size, size)
    image = np.zeros((size, size, 4), dtype=np.uint8)
    image[..., 3] = np.where(face_map >= 0, _ALPHA_UNTEXTURED, _ALPHA_BACKGROUND)
    return TextureAtlas(
        image=image,
        face_origin=origins,
        face_size=sizes,
        face_map=face_map,
        bary=bary,
        texel_density=density,
    )


def assemble_atlas(
    image: np.ndarray, origins: np.ndarray, sizes: np.ndarray, texel_density: float = 0.0
) -> TextureAtlas:
    """Rebuild a TextureAtlas from a saved image plus block layout."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 4 or image.dtype != np.uint8:
        raise InvalidArgumentError("atlas image must be RGBA8")
    origins = np.asarray(origins, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    if len(origins) != len(sizes):
        raise InvalidArgumentError("layout arrays disagree in length")
    h, w = image.shape[:2]
    if len(sizes) and ((origins < 0).any() or (origins[:, 0] + sizes > w).any()
                       or (origins[:, 1] + sizes > h).any() or (sizes < 1).any()):
        raise InvalidArgumentError("block layout exceeds the image")
    face_map, bary = _fill_texel_maps(origins, sizes, w, h)
    return TextureAtlas(
        image=image.copy(),
        face_origin=origins,
        face_size=sizes,
        face_map=face_map,
        bary=bary,
        texel_density=float(texel_density),
    )


@dataclass(frozen=True)
class BackprojectParams:
    """Blend controls: w = priority * confidence^beta per visible view.

    `front_back` names the views with priority 1; the others are side
    views whose priority drops to 1 - side_suppression * max(front/back
    confidence) per face.  None selects views 0 and 2 when there are
    exactly four views, otherwise all views get priority 1.
    """

    beta: float = 4.0
    side_suppression: float = 0.7
    depth_bias_factor: float = 1e-3
    front_back: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidArgumentError("beta must be >= 0")
        if not 0.0 <= self.side_suppression <= 1.0:
            raise InvalidArgumentError("side_suppression must be in [0, 1]")
        if self.depth_bias_factor < 0:
            raise InvalidArgumentError("depth_bias_factor must be >= 0")


def backproject(
    mesh: TriMesh,
    atlas: TextureAtlas,
    views: list[tuple[Camera, np.ndarray]],
    params: BackprojectParams = BackprojectParams(),
) -> TextureAtlas:
    """Blend view colors onto atlas texels visible from each camera.

    A texel is visible in a view when its surface point lands inside the
    image and its camera depth is within a small bias of that view's
    rasterized depth buffer.  Texels no view covers (or that only views
    with zero blend weight cover) come back flagged untextured.
    """
    for cam, img in views:
        w, h = cam.resolution
        if img.shape[0] != h or img.shape[1] != w or img.ndim != 3 or img.shape[2] < 3:
            raise InvalidArgumentError("view image does not match camera resolution")

    rows, cols = np.nonzero(atlas.face_map >= 0)
    fids = atlas.face_map[rows, cols]
    bc = atlas.bary[rows, cols].astype(np.float64)
    corners = mesh.vertices[mesh.faces[fids]]
    points = np.einsum("tc,tcd->td", bc, corners)

    fb = params.front_back
    if fb is None:
        fb = (0, 2) if len(views) == 4 else tuple(range(len(views)))
    for idx in fb:
        if not 0 <= idx < len(views):
            raise InvalidArgumentError("front_back index out of range")
    fb_conf = np.zeros(mesh.n_faces)
    for idx in fb:
        fb_conf = np.maximum(fb_conf, confidence(mesh, views[idx][0]))

    bias = params.depth_bias_factor * mesh.bbox_diagonal
    num = np.zeros((len(points), 3))
    den = np.zeros(len(points))
    for v, (cam, img) in enumerate(views):
        buffers = rasterize(mesh, cam)
        px, py, pz = cam.project(points)
        ix = np.floor(px).astype(np.int64)
        iy = np.floor(py).astype(np.int64)
        w, h = cam.resolution
        inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        ixc = np.clip(ix, 0, w - 1)
        iyc = np.clip(iy, 0, h - 1)
        zref = buffers.depth[iyc, ixc]
        visible = inside & np.isfinite(zref) & (pz <= zref + bias)
        c = confidence(mesh, cam)
        priority = np.ones(mesh.n_faces)
        if v not in fb:
            priority = 1.0 - params.side_suppression * fb_conf
        weight = np.where(visible, (priority * c**params.beta)[fids], 0.0)
        color = img[iyc, ixc, :3].astype(np.float64)
        num += weight[:, None] * color
        den += weight

    out = atlas.copy()
    textured = den > 0
    blend = np.zeros((len(points), 3))
    np.divide(num, den[:, None], out=blend, where=textured[:, None])
    out.image[rows, cols, :3] = np.where(
        textured[:, None], np.rint(blend).astype(np.uint8), 0
    )
    out.image[rows, cols, 3] = np.where(textured, _ALPHA_TEXTURED, _ALPHA_UNTEXTURED)
    return out


def untextured_faces(atlas: TextureAtlas, coverage_threshold: float = 0.5) -> np.ndarray:
    """Faces whose fraction of textured texels falls below the threshold."""
    if not 0.0 <= coverage_threshold <= 1.0:
        raise InvalidArgumentError("coverage_threshold must be in [0, 1]")
    valid = atlas.face_map >= 0
    fids = atlas.face_map[valid]
    textured = atlas.image[..., 3][valid] == _ALPHA_TEXTURED
    n_faces = len(atlas.face_size)
    total = np.bincount(fids, minlength=n_faces)
    good = np.bincount(fids, weights=textured.astype(np.float64), minlength=n_faces)
    frac = np.divide(good, total, out=np.zeros(n_faces), where=total > 0)
    return np.nonzero(frac < coverage_threshold)[0]
