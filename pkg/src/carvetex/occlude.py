"""Occlusion repair: cluster untextured faces, render them from dedicated
viewpoints onto a tiled canvas, inpaint, project back, extrapolate.

Untextured faces are grouped by k-means over [normal ; w_p * centroid /
bbox_diagonal] with face-area weights.  Each cluster gets a camera on the
mesh bounding sphere looking along its inward mean normal, rendered into
one tile of a square tile grid.  Tile pixels of textured faces carry their
current atlas colors as inpainting context; pixels of untextured faces
form the mask.  The default inpainter solves the Laplace equation on the
mask (Gauss-Seidel, red-black), which keeps every filled value inside the
range of its boundary colors.  Inpainted pixels are written back to the
texels of their recorded surface points, conflicts resolved by viewing
confidence; any faces still untextured (unseen by every cluster camera)
take area-weighted colors from textured neighbors, breadth-first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .mesh import TriMesh
from .paint import (
    _ALPHA_TEXTURED,
    _ALPHA_UNTEXTURED,
    Camera,
    TextureAtlas,
    confidence,
    rasterize,
    untextured_faces,
)

__all__ = [
    "InpaintParams",
    "OcclusionCluster",
    "OcclusionCanvas",
    "cluster_occluded",
    "cluster_viewpoint",
    "build_canvas",
    "inpaint_canvas",
    "harmonic_inpainter",
    "reproject",
    "extrapolate",
    "inpaint_occlusions",
]

_PLUS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class InpaintParams:
    k: int = 6
    position_weight: float = 1.0
    tile_resolution: int = 256
    seed: int = 0
    coverage_threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError("k must be >= 1")
        if self.position_weight < 0:
            raise InvalidArgumentError("position_weight must be >= 0")
        if self.tile_resolution < 16:
            raise InvalidArgumentError("tile_resolution must be >= 16")
        if not 0.0 <= self.coverage_threshold <= 1.0:
            raise InvalidArgumentError("coverage_threshold must be in [0, 1]")


@dataclass
class OcclusionCluster:
    faces: np.ndarray
    centroid: np.ndarray
    mean_normal: np.ndarray
    degenerate_normal: bool


@dataclass
class OcclusionCanvas:
    """Tile grid of cluster renders with per-pixel surface back-map.

    `conf` holds each pixel's face-to-tile-camera confidence, used when
    two tiles inpaint the same texel.  `fallback_components` counts mask
    regions that had no known boundary and took the tile mean.
    """

    image: np.ndarray
    face_map: np.ndarray
    bary: np.ndarray
    mask: np.ndarray
    tile_index: np.ndarray
    conf: np.ndarray
    tile_size: int
    cameras: list[Camera]
    fallback_components: int = 0


# -- clustering ----------------------------------------------------------------


def _kmeans_features(mesh: TriMesh, faces: np.ndarray, position_weight: float):
    normals = mesh.face_normals[faces]
    diag = mesh.bbox_diagonal
    diag = diag if diag > 0 else 1.0
    pos = mesh.face_centroids[faces] / diag
    return np.hstack([normals, position_weight * pos])


def cluster_occluded(
    mesh: TriMesh,
    untextured: np.ndarray,
    params: InpaintParams,
    inertia_out: list | None = None,
) -> list[OcclusionCluster]:
    """Area-weighted Lloyd k-means over [normal ; w_p * centroid / diag].

    Seeding is k-means++ under the fixed seed; k drops to the number of
    distinct feature points when smaller.  Empty clusters re-seed at the
    face farthest from its current center, so inertia (measured after each
    assignment) never increases; pass `inertia_out` to capture the
    per-round values.
    """
    untextured = np.asarray(untextured, dtype=np.int64)
    if len(untextured) == 0:
        raise InvalidArgumentError("untextured face set is empty")
    feats = _kmeans_features(mesh, untextured, params.position_weight)
    weights = mesh.face_areas[untextured]
    total = weights.sum()
    if total <= 0:
        weights = np.ones(len(untextured))
        total = float(len(untextured))
    k = min(params.k, len(np.unique(feats, axis=0)))

    rng = np.random.default_rng(params.seed)
    centers = np.empty((k, feats.shape[1]))
    pick = rng.choice(len(feats), p=weights / total)
    centers[0] = feats[pick]
    d2 = ((feats - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        probs = weights * d2
        s = probs.sum()
        pick = int(np.argmax(d2)) if s <= 0 else rng.choice(len(feats), p=probs / s)
        centers[c] = feats[pick]
        d2 = np.minimum(d2, ((feats - centers[c]) ** 2).sum(axis=1))

    assign = np.full(len(feats), -1, dtype=np.int64)
    last_inertia = np.inf
    for _ in range(100):
        dist = ((feats[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(dist, axis=1)
        inertia = float((weights * dist[np.arange(len(feats)), new_assign]).sum())
        assert inertia <= last_inertia + 1e-9, "k-means inertia increased"
        last_inertia = inertia
        if inertia_out is not None:
            inertia_out.append(inertia)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            member = assign == c
            if member.any():
                w = weights[member]
                centers[c] = (w[:, None] * feats[member]).sum(axis=0) / w.sum()
            else:
                far = int(np.argmax(((feats - centers[assign]) ** 2).sum(axis=1)))
                centers[c] = feats[far]

    clusters = []
    for c in range(k):
        member = untextured[assign == c]
        if len(member) == 0:
            continue
        area = mesh.face_areas[member]
        asum = area.sum()
        if asum <= 0:
            area = np.ones(len(member))
            asum = float(len(member))
        centroid = (area[:, None] * mesh.face_centroids[member]).sum(axis=0) / asum
        nsum = (area[:, None] * mesh.face_normals[member]).sum(axis=0)
        norm = float(np.linalg.norm(nsum))
        degenerate = norm < 1e-6
        mean_normal = np.zeros(3) if degenerate else nsum / norm
        clusters.append(
            OcclusionCluster(
                faces=np.sort(member),
                centroid=centroid,
                mean_normal=mean_normal,
                degenerate_normal=degenerate,
            )
        )
    return clusters


def cluster_viewpoint(
    mesh: TriMesh, cluster: OcclusionCluster, resolution: int = 256
) -> Camera:
    """Camera on the mesh bounding sphere looking down the cluster's normal.

    The cluster centroid projects to the image center; a degenerate mean
    normal falls back to the outward direction from the mesh centroid.
    """
    outward = cluster.mean_normal
    if cluster.degenerate_normal or np.linalg.norm(outward) < 1e-6:
        fallback = cluster.centroid - mesh.vertices.mean(axis=0)
        n = np.linalg.norm(fallback)
        outward = fallback / n if n > 0 else np.array([0.0, 0.0, 1.0])
    lo, hi = mesh.bbox()
    center = (lo + hi) / 2.0
    radius = max(mesh.bbox_diagonal / 2.0, 1e-6)

    # Largest t with |centroid - t*outward - center| = radius.
    m = cluster.centroid - center
    md = float(m @ outward)
    inside = radius * radius - float(m @ m) + md * md
    dist = max(md + math.sqrt(max(inside, 0.0)), 1e-6)

    az = math.degrees(math.atan2(outward[0], outward[1]))
    el = math.degrees(math.asin(float(np.clip(outward[2], -1.0, 1.0))))
    probe = Camera(az, el, 1.0, (resolution, resolution),
                   look_at=cluster.centroid, eye_distance=dist)
    right, up = probe.basis
    verts = mesh.vertices[np.unique(mesh.faces[cluster.faces])]
    rel = verts - cluster.centroid
    ext = 2.0 * max(float(np.abs(rel @ right).max()), float(np.abs(rel @ up).max()))
    scale = 1.2 * ext
    if not scale > 0:
        scale = max(0.05 * mesh.bbox_diagonal, 1e-6)
    return Camera(az, el, scale, (resolution, resolution),
                  look_at=cluster.centroid, eye_distance=dist)


# -- canvas --------------------------------------------------------------------


def _face_mean_colors(atlas: TextureAtlas, n_faces: int):
    """Mean textured color per face and the texel count it came from."""
    alpha = atlas.image[..., 3]
    sel = (atlas.face_map >= 0) & (alpha == _ALPHA_TEXTURED)
    fids = atlas.face_map[sel]
    colors = atlas.image[sel][:, :3].astype(np.float64)
    count = np.bincount(fids, minlength=n_faces).astype(np.float64)
    mean = np.zeros((n_faces, 3))
    for ch in range(3):
        acc = np.bincount(fids, weights=colors[:, ch], minlength=n_faces)
        np.divide(acc, count, out=mean[:, ch], where=count > 0)
    return mean, count


def build_canvas(
    mesh: TriMesh,
    atlas: TextureAtlas,
    clusters: list[OcclusionCluster],
    params: InpaintParams,
) -> OcclusionCanvas:
    """Render one tile per cluster; textured faces keep their colors, the
    untextured faces' pixels become the inpainting mask."""
    if not clusters:
        raise InvalidArgumentError("no clusters to render")
    k = len(clusters)
    t = params.tile_resolution
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    H, W = rows * t, cols * t
    image = np.zeros((H, W, 4), dtype=np.uint8)
    face_map = np.full((H, W), -1, dtype=np.int64)
    bary = np.zeros((H, W, 3), dtype=np.float32)
    mask = np.zeros((H, W), dtype=bool)
    tile_index = np.full((H, W), -1, dtype=np.int64)
    conf_map = np.zeros((H, W), dtype=np.float32)

    untex = np.zeros(mesh.n_faces, dtype=bool)
    untex[untextured_faces(atlas, params.coverage_threshold)] = True
    mean_color, _counts = _face_mean_colors(atlas, mesh.n_faces)

    cameras = []
    for idx, cluster in enumerate(clusters):
        cam = cluster_viewpoint(mesh, cluster, resolution=t)
        cameras.append(cam)
        buf = rasterize(mesh, cam)
        y0, x0 = (idx // cols) * t, (idx % cols) * t
        present = buf.face_id >= 0
        fids = buf.face_id[present]

        # Context pixels: the sampled texel's color where textured, else
        # the face's mean textured color.
        tex_x, tex_y = atlas.texel_of(
            fids, buf.bary[present][:, 1].astype(np.float64),
            buf.bary[present][:, 2].astype(np.float64)
        )
        texel_rgba = atlas.image[tex_y, tex_x]
        use_texel = texel_rgba[:, 3] == _ALPHA_TEXTURED
        ctx = np.where(
            use_texel[:, None], texel_rgba[:, :3].astype(np.float64), mean_color[fids]
        )
        tile_rgb = np.zeros((t, t, 3), dtype=np.uint8)
        tile_rgb[present] = np.rint(ctx).astype(np.uint8)
        tile_mask = np.zeros((t, t), dtype=bool)
        tile_mask[present] = untex[fids]
        tile_rgb[tile_mask] = 0

        image[y0 : y0 + t, x0 : x0 + t, :3] = tile_rgb
        image[y0 : y0 + t, x0 : x0 + t, 3] = np.where(present, 255, 0)
        face_map[y0 : y0 + t, x0 : x0 + t] = buf.face_id
        bary[y0 : y0 + t, x0 : x0 + t] = buf.bary
        mask[y0 : y0 + t, x0 : x0 + t] = tile_mask
        tile_index[y0 : y0 + t, x0 : x0 + t] = np.where(present, idx, -1)
        tile_conf = np.zeros((t, t), dtype=np.float32)
        tile_conf[present] = confidence(mesh, cam)[fids]
        conf_map[y0 : y0 + t, x0 : x0 + t] = tile_conf
    return OcclusionCanvas(
        image=image,
        face_map=face_map,
        bary=bary,
        mask=mask,
        tile_index=tile_index,
        conf=conf_map,
        tile_size=t,
        cameras=cameras,
    )


# -- inpainting ----------------------------------------------------------------


def _zero_boundary_islands(domain: np.ndarray, unknown: np.ndarray) -> np.ndarray:
    """Unknown components with no known domain pixel 4-adjacent to them."""
    known = domain & ~unknown
    labels, n_labels = ndimage.label(unknown)
    has_boundary = np.zeros(n_labels + 1, dtype=bool)
    touch = ndimage.binary_dilation(unknown, _PLUS) & known
    ty, tx = np.nonzero(touch)
    h, w = unknown.shape
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ny, nx = ty + dy, tx + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        has_boundary[labels[ny[ok], nx[ok]]] = True
    has_boundary[0] = False
    return unknown & ~has_boundary[labels]


def harmonic_inpainter(tile: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill mask pixels by solving the Laplace equation over the domain.

    Domain = pixels with alpha > 0; Dirichlet data = known domain pixels.
    Red-black Gauss-Seidel per channel until the largest update falls
    below 0.5/255 (or 10,000 sweeps).  Mask components with no known
    neighbor take the tile's mean known color.
    """
    out = tile.copy()
    domain = tile[..., 3] > 0
    unknown = mask & domain
    if not unknown.any():
        return out
    known = domain & ~unknown
    vals = tile[..., :3].astype(np.float64) / 255.0
    h, w = unknown.shape

    islands = _zero_boundary_islands(domain, unknown)
    fill_mean = vals[known].mean(axis=0) if known.any() else np.full(3, 0.5)
    vals[islands] = fill_mean
    solve = unknown & ~islands

    if solve.any():
        vals[solve] = fill_mean
        sy, sx = np.nonzero(solve)
        parity = ((sy + sx) % 2) == 0
        phases = []
        for phase in (parity, ~parity):
            py, px = sy[phase], sx[phase]
            nbr = []
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = py + dy, px + dx
                ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                nyc, nxc = np.clip(ny, 0, h - 1), np.clip(nx, 0, w - 1)
                ok &= domain[nyc, nxc]
                nbr.append((nyc, nxc, ok))
            phases.append((py, px, nbr))
        tol = 0.5 / 255.0
        for _ in range(10000):
            maxres = 0.0
            for py, px, nbr in phases:
                if len(py) == 0:
                    continue
                acc = np.zeros((len(py), 3))
                cnt = np.zeros(len(py))
                for ny, nx, ok in nbr:
                    acc[ok] += vals[ny[ok], nx[ok]]
                    cnt += ok
                have = cnt > 0
                new = np.where(have[:, None], acc / np.maximum(cnt, 1.0)[:, None], vals[py, px])
                maxres = max(maxres, float(np.abs(new - vals[py, px]).max(initial=0.0)))
                vals[py, px] = new
            if maxres < tol:
                break

    filled = np.clip(np.rint(vals * 255.0), 0, 255).astype(np.uint8)
    out[unknown, :3] = filled[unknown]
    return out


def inpaint_canvas(canvas: OcclusionCanvas, inpainter=None) -> OcclusionCanvas:
    """Run the inpainter tile by tile; only mask pixels may change."""
    fn = inpainter if inpainter is not None else harmonic_inpainter
    t = canvas.tile_size
    H, W = canvas.mask.shape
    image = canvas.image.copy()
    fallbacks = 0
    for y0 in range(0, H, t):
        for x0 in range(0, W, t):
            tile_mask = canvas.mask[y0 : y0 + t, x0 : x0 + t]
            if not tile_mask.any():
                continue
            tile = canvas.image[y0 : y0 + t, x0 : x0 + t]
            domain = tile[..., 3] > 0
            islands = _zero_boundary_islands(domain, tile_mask & domain)
            fallbacks += int(ndimage.label(islands)[1])
            result = np.asarray(fn(tile, tile_mask))
            if result.shape != tile.shape:
                raise InvalidArgumentError("inpainter changed the tile shape")
            image[y0 : y0 + t, x0 : x0 + t][tile_mask] = result[tile_mask]
    return OcclusionCanvas(
        image=image,
        face_map=canvas.face_map,
        bary=canvas.bary,
        mask=canvas.mask,
        tile_index=canvas.tile_index,
        conf=canvas.conf,
        tile_size=canvas.tile_size,
        cameras=canvas.cameras,
        fallback_components=fallbacks,
    )


# -- writing back --------------------------------------------------------------


def reproject(canvas: OcclusionCanvas, atlas: TextureAtlas) -> TextureAtlas:
    """Write inpainted canvas pixels to the texels of their surface points.

    Conflicting writes to one texel resolve by higher recorded confidence,
    then lower tile index, then pixel order; only texels back-mapped from
    mask pixels (pixels of untextured faces) change.
    """
    out = atlas.copy()
    py, px = np.nonzero(canvas.mask)
    if len(py) == 0:
        return out
    fids = canvas.face_map[py, px]
    bc = canvas.bary[py, px].astype(np.float64)
    tiles = canvas.tile_index[py, px]
    tex_x, tex_y = atlas.texel_of(fids, bc[:, 1], bc[:, 2])
    colors = canvas.image[py, px, :3]
    per_pixel_conf = canvas.conf[py, px].astype(np.float64)

    flat = tex_y.astype(np.int64) * atlas.image.shape[1] + tex_x
    order = np.lexsort((np.arange(len(flat)), tiles, -per_pixel_conf, flat))
    flat_sorted = flat[order]
    first = np.ones(len(flat_sorted), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    chosen = order[first]

    out.image[tex_y[chosen], tex_x[chosen], :3] = colors[chosen]
    out.image[tex_y[chosen], tex_x[chosen], 3] = _ALPHA_TEXTURED
    return out


def extrapolate(mesh: TriMesh, atlas: TextureAtlas) -> TextureAtlas:
    """Flood colors over any still-untextured texels via face adjacency.

    Faces with some textured texels first fill their own blanks with their
    mean color; fully blank faces then take the area-weighted mean of
    textured neighbors, wave by wave.  Blank components out of reach fall
    back to the global mean.  Requires at least one textured texel.
    """
    out = atlas.copy()
    alpha = out.image[..., 3]
    blank = (out.face_map >= 0) & (alpha == _ALPHA_UNTEXTURED)
    if not blank.any():
        return out
    if not (alpha == _ALPHA_TEXTURED).any():
        raise InvalidArgumentError("extrapolate needs at least one textured texel")

    mean_color, count = _face_mean_colors(out, mesh.n_faces)
    has_color = count > 0

    # Partially textured faces own their mean.
    brows, bcols = np.nonzero(blank)
    fids = out.face_map[brows, bcols]
    own = has_color[fids]
    out.image[brows[own], bcols[own], :3] = np.rint(mean_color[fids[own]]).astype(np.uint8)
    out.image[brows[own], bcols[own], 3] = _ALPHA_TEXTURED

    adjacency = [[] for _ in range(mesh.n_faces)]
    for a, b in mesh.face_adjacency:
        adjacency[a].append(b)
        adjacency[b].append(a)
    areas = mesh.face_areas
    colored = has_color.copy()
    pending = np.nonzero(~colored)[0]
    while len(pending):
        wave = []
        for f in pending:
            nbrs = [g for g in adjacency[f] if colored[g]]
            if nbrs:
                w = areas[nbrs]
                tw = w.sum()
                if tw <= 0:
                    w = np.ones(len(nbrs))
                    tw = float(len(nbrs))
                wave.append((f, (w[:, None] * mean_color[nbrs]).sum(axis=0) / tw))
        if not wave:
            fallback = mean_color[colored].mean(axis=0)
            for f in pending:
                mean_color[f] = fallback
                colored[f] = True
            break
        for f, col in wave:
            mean_color[f] = col
            colored[f] = True
        pending = np.nonzero(~colored)[0]

    still = (out.face_map >= 0) & (out.image[..., 3] == _ALPHA_UNTEXTURED)
    rows, cols = np.nonzero(still)
    fids = out.face_map[rows, cols]
    out.image[rows, cols, :3] = np.rint(mean_color[fids]).astype(np.uint8)
    out.image[rows, cols, 3] = _ALPHA_TEXTURED
    return out


def inpaint_occlusions(
    mesh: TriMesh,
    atlas: TextureAtlas,
    params: InpaintParams = InpaintParams(),
    inpainter=None,
    report: dict | None = None,
) -> TextureAtlas:
    """Full occlusion pass; output has zero untextured texels.

    Pass `report` to capture counters (untextured faces, clusters, mask
    pixels, fallback components) for diagnostics.
    """
    untex = untextured_faces(atlas, params.coverage_threshold)
    result = atlas
    stats = {"untextured_faces": int(len(untex)), "clusters": 0,
             "mask_pixels": 0, "fallback_components": 0}
    if len(untex):
        clusters = cluster_occluded(mesh, untex, params)
        canvas = build_canvas(mesh, result, clusters, params)
        canvas = inpaint_canvas(canvas, inpainter)
        result = reproject(canvas, result)
        stats["clusters"] = len(clusters)
        stats["mask_pixels"] = int(canvas.mask.sum())
        stats["fallback_components"] = int(canvas.fallback_components)
    result = extrapolate(mesh, result)
    valid = result.face_map >= 0
    assert (result.image[..., 3][valid] == _ALPHA_TEXTURED).all()
    if report is not None:
        report.update(stats)
    return result
