"""Isosurface extraction from voxel grids and mesh cleaning.

The extractor walks every grid cell and emits triangles from a 256-entry
case table.  The table is generated at import time from first principles:
for each corner-occupancy pattern, every cube face contributes crossing
segments, ambiguous faces (diagonal patterns) are resolved by a fixed rule
that keeps the two inside corners connected across the face, the segments
are chained into closed loops, and each loop is oriented outward and fan
triangulated.  Because the ambiguity rule depends only on the face's own
corner pattern, the two cells sharing a face always agree on its segments,
so extraction is crack free and closed whenever the solid does not touch
the grid boundary.

Cube corner and edge numbering (z up):

        7 ------ 6
       /|       /|           corner 0 = (0,0,0)   corner 4 = (0,0,1)
      4 ------ 5 |           corner 1 = (1,0,0)   corner 5 = (1,0,1)
      | |      | |           corner 2 = (1,1,0)   corner 6 = (1,1,1)
      | 3 -----|-2           corner 3 = (0,1,0)   corner 7 = (0,1,1)
      |/       |/
      0 ------ 1
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .field import GridField
from .mesh import TriMesh

__all__ = [
    "marching_cubes",
    "merge_duplicate_vertices",
    "remove_zero_area_faces",
    "remove_unreferenced_vertices",
    "remove_small_components",
    "repair_nonmanifold",
    "CleanParams",
    "clean",
    "mesh_diagnostics",
]

_CORNER_POS = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=np.float64,
)

_EDGE_CORNERS = [
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
]

# Each cube face: corners in cyclic order, the cube-edge id between
# consecutive corners (edge m joins corner m and corner (m+1) % 4), and the
# direction out of the cube through that face.
_FACES = [
    ((0, 1, 2, 3), (0, 1, 2, 3), (0, 0, -1)),      # z = 0
    ((4, 5, 6, 7), (4, 5, 6, 7), (0, 0, 1)),       # z = 1
    ((0, 1, 5, 4), (0, 9, 4, 8), (0, -1, 0)),      # y = 0
    ((3, 2, 6, 7), (2, 10, 6, 11), (0, 1, 0)),     # y = 1
    ((0, 3, 7, 4), (3, 11, 7, 8), (-1, 0, 0)),     # x = 0
    ((1, 2, 6, 5), (1, 10, 5, 9), (1, 0, 0)),      # x = 1
]


def _edge_midpoint(e: int) -> np.ndarray:
    a, b = _EDGE_CORNERS[e]
    return (_CORNER_POS[a] + _CORNER_POS[b]) / 2.0


def _face_segments(inside: tuple[int, ...], corners, edges) -> list[tuple[int, int]]:
    """Undirected surface segments crossing one cube face.

    `inside` is the 8-corner occupancy pattern.  Ambiguous faces (both
    diagonals occupied) keep the inside corners connected, which pairs the
    crossing edges around each outside corner; this choice depends only on
    the face's own corner pattern, so the two cells sharing the face agree.
    """
    s = [inside[c] for c in corners]
    crossing = [m for m in range(4) if s[m] != s[(m + 1) % 4]]
    if not crossing:
        return []
    if len(crossing) == 2:
        return [(edges[crossing[0]], edges[crossing[1]])]
    # Four crossings: diagonal pattern.  Pair edges around outside corners.
    segs = []
    for m in range(4):
        if not s[m]:
            segs.append((edges[(m - 1) % 4], edges[m]))
    assert len(segs) == 2
    return segs


def _directed_segments(inside: tuple[int, ...]) -> dict[int, int]:
    """Map each crossing cube edge to its successor along the surface.

    Each face segment is directed so that, looking along the face's outward
    direction `f`, the face's inside corners lie to the segment's right:
    with `w` pointing from the segment toward the inside corners, the
    traversal direction `t` satisfies dot(cross(f, w), t) > 0.  The adjacent
    cell sees the same face with `f` negated, hence traverses the segment
    the opposite way, which makes orientation globally consistent.
    """
    succ: dict[int, int] = {}
    for corners, edges, f in _FACES:
        ins = [c for c in corners if inside[c]]
        if not ins or len(ins) == 4:
            continue
        ins_mean = _CORNER_POS[ins].mean(axis=0)
        for ea, eb in _face_segments(inside, corners, edges):
            pa, pb = _edge_midpoint(ea), _edge_midpoint(eb)
            w = ins_mean - (pa + pb) / 2.0
            side = float(np.dot(np.cross(np.asarray(f, dtype=float), w), pb - pa))
            assert abs(side) > 1e-9, "segment direction undecidable"
            a, b = (ea, eb) if side > 0 else (eb, ea)
            assert a not in succ, "crossing edge with two outgoing segments"
            succ[a] = b
    return succ


def _loops_for_config(config: int) -> list[list[int]]:
    """Closed, outward-oriented loops of cube-edge ids for one corner pattern."""
    inside = tuple((config >> c) & 1 for c in range(8))
    succ = _directed_segments(inside)
    assert set(succ) == set(succ.values()), "directed segments do not chain"
    loops = []
    visited: set[int] = set()
    for start in sorted(succ):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = succ[start]
        while cur != start:
            loop.append(cur)
            visited.add(cur)
            cur = succ[cur]
        assert len(loop) >= 3
        loops.append(loop)
    return loops


_FACEMATES = np.zeros((12, 12), dtype=bool)
for _corners, _edges, _f in _FACES:
    for _i in range(4):
        for _j in range(_i + 1, 4):
            _FACEMATES[_edges[_i], _edges[_j]] = True
            _FACEMATES[_edges[_j], _edges[_i]] = True


def _triangulate_loop(loop: list[int]) -> list[tuple[int, int, int]]:
    """Split a loop into triangles using no chord between face-mate edges.

    A chord joining two crossing edges of a common cube face could coincide
    with a chord drawn by the neighboring cell, stacking four triangles on
    one mesh edge.  Restricting chords to non face-mates makes collisions
    impossible; a valid triangulation exists for every loop of every
    pattern (checked by the assertion below).  The interval split keeps the
    loop's winding.
    """
    m = len(loop)

    def safe(i: int, j: int) -> bool:
        if j - i == 1 or (i == 0 and j == m - 1):
            return True
        return not _FACEMATES[loop[i], loop[j]]

    feasible: dict[tuple[int, int], bool] = {}

    def feas(i: int, j: int) -> bool:
        if j - i < 2:
            return True
        key = (i, j)
        if key not in feasible:
            feasible[key] = any(
                safe(i, k) and safe(k, j) and feas(i, k) and feas(k, j)
                for k in range(i + 1, j)
            )
        return feasible[key]

    assert feas(0, m - 1), f"loop {loop} has no face-mate-free triangulation"
    tris: list[tuple[int, int, int]] = []

    def emit(i: int, j: int) -> None:
        if j - i < 2:
            return
        for k in range(i + 1, j):
            if safe(i, k) and safe(k, j) and feas(i, k) and feas(k, j):
                tris.append((loop[i], loop[k], loop[j]))
                emit(i, k)
                emit(k, j)
                return

    emit(0, m - 1)
    return tris


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    tri_table = np.full((256, 16), -1, dtype=np.int8)
    tri_counts = np.zeros(256, dtype=np.int64)
    for config in range(256):
        if config in (0, 255):
            continue
        entries: list[int] = []
        for loop in _loops_for_config(config):
            for tri in _triangulate_loop(loop):
                entries.extend(tri)
        assert len(entries) <= 15
        tri_table[config, : len(entries)] = entries
        tri_counts[config] = len(entries)
    return tri_table, tri_counts


MC_TRI_TABLE, MC_TRI_COUNTS = _build_tables()


def marching_cubes(grid: GridField, iso: float = 0.5) -> TriMesh:
    """Extract the iso-level surface of a voxel occupancy grid.

    Lattice points with value strictly above `iso` count as inside.
    Vertices are placed on crossing lattice edges by linear interpolation
    (edge midpoints for binary data) and shared between cells.  Winding is
    counterclockwise seen from outside the solid.
    """
    if not (0.0 < iso < 1.0):
        raise InvalidArgumentError(f"iso must lie in (0, 1), got {iso}")
    values = grid.values
    nx, ny, nz = grid.dims
    inside = values > iso

    verts_parts: list[np.ndarray] = []
    vidx = []
    offset = 0
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        cross = inside[lo] != inside[hi]
        idx = np.full(cross.shape, -1, dtype=np.int64)
        n = int(np.count_nonzero(cross))
        idx[cross] = offset + np.arange(n)
        offset += n
        vidx.append(idx)
        if n:
            va = values[lo][cross]
            vb = values[hi][cross]
            t = (iso - va) / (vb - va)
            base = np.argwhere(cross).astype(np.float64)
            base[:, axis] += t
            verts_parts.append(grid.origin + grid.spacing * base)

    if offset == 0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    vertices = np.concatenate(verts_parts)

    config = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.uint8)
    corner_slices = [
        (slice(0, -1), slice(0, -1), slice(0, -1)),
        (slice(1, None), slice(0, -1), slice(0, -1)),
        (slice(1, None), slice(1, None), slice(0, -1)),
        (slice(0, -1), slice(1, None), slice(0, -1)),
        (slice(0, -1), slice(0, -1), slice(1, None)),
        (slice(1, None), slice(0, -1), slice(1, None)),
        (slice(1, None), slice(1, None), slice(1, None)),
        (slice(0, -1), slice(1, None), slice(1, None)),
    ]
    for c, sl in enumerate(corner_slices):
        config |= inside[sl].astype(np.uint8) << c

    ci, cj, ck = np.nonzero((config != 0) & (config != 255))
    if len(ci) == 0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    cfg = config[ci, cj, ck]

    vx, vy, vz = vidx
    slot = np.empty((len(ci), 12), dtype=np.int64)
    slot[:, 0] = vx[ci, cj, ck]
    slot[:, 1] = vy[ci + 1, cj, ck]
    slot[:, 2] = vx[ci, cj + 1, ck]
    slot[:, 3] = vy[ci, cj, ck]
    slot[:, 4] = vx[ci, cj, ck + 1]
    slot[:, 5] = vy[ci + 1, cj, ck + 1]
    slot[:, 6] = vx[ci, cj + 1, ck + 1]
    slot[:, 7] = vy[ci, cj, ck + 1]
    slot[:, 8] = vz[ci, cj, ck]
    slot[:, 9] = vz[ci + 1, cj, ck]
    slot[:, 10] = vz[ci + 1, cj + 1, ck]
    slot[:, 11] = vz[ci, cj + 1, ck]

    rows = MC_TRI_TABLE[cfg][:, :15].astype(np.int64)
    keep = np.arange(15)[None, :] < MC_TRI_COUNTS[cfg][:, None]
    gathered = np.take_along_axis(slot, np.where(keep, rows, 0), axis=1)
    flat = gathered[keep]
    faces = flat.reshape(-1, 3)
    if faces.size and faces.min() < 0:
        raise RuntimeError("case table referenced a non-crossing edge")
    return TriMesh(vertices, faces)


# -- cleaning ---------------------------------------------------------------


def merge_duplicate_vertices(mesh: TriMesh, eps: float) -> TriMesh:
    """Collapse vertices that fall in the same eps-sized lattice cell.

    Bucketing is a quantized grid: vertices whose coordinates round to the
    same integer triple at resolution `eps` merge to the first occurrence.
    Near-duplicates straddling a bucket boundary stay distinct; that is the
    documented cost of determinism.  Faces that lose two corners to one
    representative are dropped.  `eps` = 0 merges exact duplicates only.
    """
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    v = mesh.vertices
    if len(v) == 0:
        return TriMesh(v.copy(), mesh.faces.copy())
    if eps == 0:
        keys = v
    else:
        keys = np.round(v / eps).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    first = np.full(len(uniq), len(v), dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(len(v)))
    # Order representatives by first occurrence so output is stable.
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    new_vertices = v[first[order]]
    remap = rank[inverse]
    faces = remap[mesh.faces]
    ok = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 0] != faces[:, 2])
    )
    return TriMesh(new_vertices, faces[ok])


def remove_zero_area_faces(mesh: TriMesh, area_eps: float) -> TriMesh:
    """Drop faces with area below `area_eps`; vertices are left untouched."""
    if area_eps < 0:
        raise InvalidArgumentError(f"area_eps must be >= 0, got {area_eps}")
    keep = mesh.face_areas >= area_eps
    return TriMesh(mesh.vertices.copy(), mesh.faces[keep])


def remove_unreferenced_vertices(mesh: TriMesh) -> TriMesh:
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.faces.ravel()] = True
    remap = np.cumsum(used) - 1
    return TriMesh(mesh.vertices[used], remap[mesh.faces])


def remove_small_components(mesh: TriMesh, min_face_fraction: float) -> TriMesh:
    """Drop edge-connected face components smaller than a fraction of all faces.

    The largest component always survives (lowest label wins size ties).
    """
    if not (0.0 <= min_face_fraction <= 1.0):
        raise InvalidArgumentError(
            f"min_face_fraction must lie in [0, 1], got {min_face_fraction}"
        )
    if mesh.n_faces == 0:
        return TriMesh(mesh.vertices.copy(), mesh.faces.copy())
    labels = mesh.face_components()
    counts = np.bincount(labels)
    keep_labels = counts >= min_face_fraction * mesh.n_faces
    keep_labels[np.argmax(counts)] = True
    return TriMesh(mesh.vertices.copy(), mesh.faces[keep_labels[labels]])


def repair_nonmanifold(mesh: TriMesh) -> TriMesh:
    """Remove faces until every edge has at most two incident faces.

    While any edge is overloaded, the smallest-area face touching an
    overloaded edge is deleted (ties broken by lowest face index) and the
    incidence counts are updated before the next pick.
    """
    f = mesh.faces
    if len(f) == 0:
        return TriMesh(mesh.vertices.copy(), f.copy())
    areas = mesh.face_areas
    edge_faces: dict[tuple[int, int], list[int]] = {}
    face_edges: list[tuple[tuple[int, int], ...]] = []
    for fid in range(len(f)):
        a, b, c = (int(x) for x in f[fid])
        keys = tuple(
            (min(p, q), max(p, q)) for p, q in ((a, b), (b, c), (c, a))
        )
        face_edges.append(keys)
        for k in keys:
            edge_faces.setdefault(k, []).append(fid)
    counts = {k: len(v) for k, v in edge_faces.items()}
    offending = {k for k, n in counts.items() if n > 2}
    removed = np.zeros(len(f), dtype=bool)
    while offending:
        best = None
        for k in offending:
            for fid in edge_faces[k]:
                if removed[fid]:
                    continue
                cand = (areas[fid], fid)
                if best is None or cand < best:
                    best = cand
        fid = best[1]
        removed[fid] = True
        for k in face_edges[fid]:
            counts[k] -= 1
            if counts[k] <= 2:
                offending.discard(k)
    return TriMesh(mesh.vertices.copy(), f[~removed])


@dataclass(frozen=True)
class CleanParams:
    """Thresholds for `clean`.  None fields are derived from the mesh:

    merge_eps = 1e-6 * bbox diagonal, area_eps = 1e-12 * diagonal^2,
    min_component_fraction = 0.02.
    """

    merge_eps: float | None = None
    area_eps: float | None = None
    min_component_fraction: float = 0.02


def clean(mesh: TriMesh, params: CleanParams | None = None) -> TriMesh:
    """Merge duplicates, drop degenerate faces, repair overloaded edges,
    discard small components, and compact vertices, in that order."""
    if params is None:
        params = CleanParams()
    diag = mesh.bbox_diagonal
    merge_eps = params.merge_eps if params.merge_eps is not None else 1e-6 * diag
    area_eps = params.area_eps if params.area_eps is not None else 1e-12 * diag * diag
    out = merge_duplicate_vertices(mesh, merge_eps)
    out = remove_zero_area_faces(out, area_eps)
    out = repair_nonmanifold(out)
    out = remove_small_components(out, params.min_component_fraction)
    out = remove_unreferenced_vertices(out)
    return out


def mesh_diagnostics(mesh: TriMesh) -> dict:
    """Summary counters used by stats files and tests."""
    ncomp = int(mesh.face_components().max() + 1) if mesh.n_faces else 0
    return {
        "vertices": mesh.n_vertices,
        "faces": mesh.n_faces,
        "edges": len(mesh.edges),
        "boundary_edges": len(mesh.boundary_edges),
        "nonmanifold_edges": mesh.nonmanifold_edge_count,
        "pinched_vertices": mesh.pinched_vertex_count(),
        "components": ncomp,
        "euler": mesh.euler_characteristic(),
        "volume": mesh.enclosed_volume(),
        "closed": mesh.is_closed(),
        "oriented": mesh.is_oriented(),
    }
