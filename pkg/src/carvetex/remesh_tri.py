"""Isotropic triangle remeshing.

Each round applies four passes toward a uniform target edge length:

1. split every edge longer than `split_factor * target` at its midpoint,
2. collapse every edge shorter than `collapse_factor * target` to its
   midpoint when topology and geometry guards allow it,
3. flip edges when that strictly lowers the squared deviation of vertex
   valences from their targets (6 interior, 4 boundary),
4. one pass of area-weighted tangential smoothing.

Splitting handles all marked edges of a sweep simultaneously: a face with
one, two, or three marked edges becomes two, three, or four faces, and
sweeps repeat until no edge exceeds the threshold.  All passes preserve
edge manifoldness and visit candidates in a deterministic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .mesh import TriMesh

__all__ = [
    "RemeshParams",
    "RoundStats",
    "split_long_edges",
    "collapse_short_edges",
    "equalize_valences",
    "tangential_smooth",
    "isotropic_remesh",
]


@dataclass(frozen=True)
class RemeshParams:
    target_edge_length: float
    iterations: int = 5
    split_factor: float = 4.0 / 3.0
    collapse_factor: float = 4.0 / 5.0
    smoothing: float = 0.5

    def __post_init__(self):
        if not self.target_edge_length > 0:
            raise InvalidArgumentError("target_edge_length must be positive")
        if self.iterations < 0:
            raise InvalidArgumentError("iterations must be >= 0")
        if not (0 < self.collapse_factor < 1 < self.split_factor):
            raise InvalidArgumentError(
                "factors must satisfy 0 < collapse_factor < 1 < split_factor"
            )
        if not (0 <= self.smoothing <= 1):
            raise InvalidArgumentError("smoothing must lie in [0, 1]")


@dataclass
class RoundStats:
    round: int
    vertices: int
    faces: int
    edges: int
    mean_edge: float
    mean_valence: float
    volume: float

    def csv_row(self) -> str:
        return (
            f"{self.round},{self.edges},{self.mean_edge:.9g},"
            f"{self.mean_valence:.9g},{self.volume:.9g}"
        )


# -- splitting ---------------------------------------------------------------


def split_long_edges(mesh: TriMesh, threshold: float, max_sweeps: int = 200) -> TriMesh:
    """Split edges longer than `threshold` at their midpoints until none remain.

    Marked edges of one sweep are split together; each face is retiled
    according to how many of its edges were marked (two-edge faces use the
    shorter of the two possible diagonals).
    """
    if not threshold > 0:
        raise InvalidArgumentError("threshold must be positive")
    for _ in range(max_sweeps):
        edges = mesh.edges
        if len(edges) == 0:
            return mesh
        lengths = np.linalg.norm(
            mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
        )
        marked = lengths > threshold
        if not marked.any():
            return mesh
        mesh = _split_sweep(mesh, marked)
    raise RuntimeError("edge splitting did not converge")


def _split_sweep(mesh: TriMesh, marked: np.ndarray) -> TriMesh:
    v = mesh.vertices
    f = mesh.faces
    edges = mesh.edges
    mid_id = np.full(len(edges), -1, dtype=np.int64)
    mids = (v[edges[marked, 0]] + v[edges[marked, 1]]) / 2.0
    mid_id[marked] = len(v) + np.arange(len(mids))
    new_v = np.concatenate([v, mids])

    fe = mesh.face_edge_ids          # edge id at corner c joins f[c], f[(c+1)%3]
    fm = marked[fe]                  # (F, 3) which face edges are marked
    fmid = mid_id[fe]                # (F, 3) midpoint vertex ids (-1 unmarked)
    pattern = fm[:, 0] * 1 + fm[:, 1] * 2 + fm[:, 2] * 4

    out = [f[pattern == 0]]

    def rotated(sel, r):
        """Faces and their edge midpoints rotated so corner r becomes corner 0."""
        idx = np.nonzero(sel)[0]
        cols = [(r + k) % 3 for k in range(3)]
        return f[idx][:, cols], fmid[idx][:, cols]

    # One marked edge, canonical form: edge (v0, v1) marked with midpoint m.
    for r, mask_val in ((0, 1), (1, 2), (2, 4)):
        sel = pattern == mask_val
        if not sel.any():
            continue
        ff, mm = rotated(sel, r)
        m = mm[:, 0]
        out.append(np.stack([ff[:, 0], m, ff[:, 2]], axis=1))
        out.append(np.stack([m, ff[:, 1], ff[:, 2]], axis=1))

    # Two marked edges, canonical: (v0, v1) and (v1, v2) marked.
    for r, mask_val in ((0, 3), (1, 6), (2, 5)):
        sel = pattern == mask_val
        if not sel.any():
            continue
        ff, mm = rotated(sel, r)
        m01, m12 = mm[:, 0], mm[:, 1]
        out.append(np.stack([m01, ff[:, 1], m12], axis=1))
        diag_a = np.linalg.norm(new_v[ff[:, 0]] - new_v[m12], axis=1)
        diag_b = np.linalg.norm(new_v[m01] - new_v[ff[:, 2]], axis=1)
        use_a = diag_a <= diag_b
        out.append(
            np.where(
                use_a[:, None],
                np.stack([ff[:, 0], m01, m12], axis=1),
                np.stack([ff[:, 0], m01, ff[:, 2]], axis=1),
            )
        )
        out.append(
            np.where(
                use_a[:, None],
                np.stack([ff[:, 0], m12, ff[:, 2]], axis=1),
                np.stack([m01, m12, ff[:, 2]], axis=1),
            )
        )

    sel = pattern == 7
    if sel.any():
        ff, mm = rotated(sel, 0)
        m01, m12, m20 = mm[:, 0], mm[:, 1], mm[:, 2]
        out.append(np.stack([ff[:, 0], m01, m20], axis=1))
        out.append(np.stack([ff[:, 1], m12, m01], axis=1))
        out.append(np.stack([ff[:, 2], m20, m12], axis=1))
        out.append(np.stack([m01, m12, m20], axis=1))

    return TriMesh(new_v, np.concatenate(out))


# -- edit mesh for collapses and flips ----------------------------------------


class _EditMesh:
    """Mutable triangle mesh: positions plus face and vertex-face tables."""

    def __init__(self, mesh: TriMesh):
        self.pos: list[np.ndarray] = [p.copy() for p in mesh.vertices]
        self.faces: dict[int, tuple[int, int, int]] = {
            i: (int(a), int(b), int(c)) for i, (a, b, c) in enumerate(mesh.faces)
        }
        self.vf: dict[int, set[int]] = {v: set() for v in range(len(self.pos))}
        for fid, tri in self.faces.items():
            for vtx in tri:
                self.vf[vtx].add(fid)

    def to_trimesh(self) -> TriMesh:
        """Compact to arrays, dropping unreferenced vertices."""
        fids = sorted(self.faces)
        tris = np.array([self.faces[i] for i in fids], dtype=np.int64).reshape(-1, 3)
        used = np.zeros(len(self.pos), dtype=bool)
        used[tris.ravel()] = True
        remap = np.cumsum(used) - 1
        verts = np.array([self.pos[i] for i in np.nonzero(used)[0]], dtype=np.float64)
        return TriMesh(verts.reshape(-1, 3), remap[tris])

    # -- queries ------------------------------------------------------------

    def edge_faces(self, a: int, b: int) -> set[int]:
        return self.vf[a] & self.vf[b]

    def ring(self, v: int) -> set[int]:
        out: set[int] = set()
        for fid in self.vf[v]:
            out.update(self.faces[fid])
        out.discard(v)
        return out

    def edge_set(self) -> set[tuple[int, int]]:
        edges: set[tuple[int, int]] = set()
        for a, b, c in self.faces.values():
            edges.add((a, b) if a < b else (b, a))
            edges.add((b, c) if b < c else (c, b))
            edges.add((a, c) if a < c else (c, a))
        return edges

    def boundary_vertices(self) -> set[int]:
        counts: dict[tuple[int, int], int] = {}
        for a, b, c in self.faces.values():
            for u, w in ((a, b), (b, c), (c, a)):
                k = (u, w) if u < w else (w, u)
                counts[k] = counts.get(k, 0) + 1
        out: set[int] = set()
        for (u, w), n in counts.items():
            if n == 1:
                out.add(u)
                out.add(w)
        return out

    def face_normal_raw(self, tri, override: dict[int, np.ndarray] | None = None):
        def p(vtx):
            if override and vtx in override:
                return override[vtx]
            return self.pos[vtx]

        a, b, c = tri
        return np.cross(p(b) - p(a), p(c) - p(a))


def collapse_short_edges(em: _EditMesh, short: float, long: float) -> int:
    """Collapse edges shorter than `short` to their midpoints.

    A collapse is skipped when it would break the link condition, create an
    edge longer than `long`, flip a surviving face normal by more than 90
    degrees, produce a degenerate face, or pinch the boundary.  Candidates
    are visited shortest first; sweeps repeat until none applies.  Returns
    the number of collapses performed.
    """
    total = 0
    while True:
        boundary = em.boundary_vertices()
        cand = []
        for a, b in em.edge_set():
            d = em.pos[a] - em.pos[b]
            l2 = float(d @ d)
            if l2 < short * short:
                cand.append((l2, a, b))
        cand.sort()
        performed = 0
        for l2, a, b in cand:
            if a not in em.vf or b not in em.vf:
                continue
            fids = em.edge_faces(a, b)
            if not fids:
                continue
            d = em.pos[a] - em.pos[b]
            if float(d @ d) >= short * short:
                continue
            if _try_collapse(em, a, b, fids, long, boundary):
                performed += 1
        total += performed
        if performed == 0:
            return total


def _try_collapse(em, a, b, fids, long, boundary) -> bool:
    # Boundary pinch: an interior edge between two boundary vertices would
    # fuse two boundary arcs.
    if len(fids) == 2 and a in boundary and b in boundary:
        return False
    opposite = {v for fid in fids for v in em.faces[fid] if v not in (a, b)}
    if em.ring(a) & em.ring(b) != opposite:
        return False
    mid = (em.pos[a] + em.pos[b]) / 2.0
    neighborhood = (em.ring(a) | em.ring(b)) - {a, b}
    long2 = long * long
    for u in neighborhood:
        d = mid - em.pos[u]
        if float(d @ d) > long2:
            return False
    override = {a: mid, b: mid}
    for fid in (em.vf[a] | em.vf[b]) - fids:
        tri = em.faces[fid]
        n_old = em.face_normal_raw(tri)
        n_new = em.face_normal_raw(tri, override)
        nn = float(n_new @ n_new)
        if nn < 1e-24 or float(n_old @ n_new) <= 0.0:
            return False
    # Execute: a survives at the midpoint, b is removed.
    em.pos[a] = mid
    for fid in fids:
        for vtx in em.faces[fid]:
            em.vf[vtx].discard(fid)
        del em.faces[fid]
    for fid in list(em.vf[b]):
        tri = em.faces[fid]
        em.faces[fid] = tuple(a if vtx == b else vtx for vtx in tri)
        em.vf[b].discard(fid)
        em.vf[a].add(fid)
    del em.vf[b]
    return True


def equalize_valences(em: _EditMesh) -> int:
    """Flip interior edges when that strictly lowers valence deviation.

    Targets are 6 for interior and 4 for boundary vertices.  One pass over
    the current edges in sorted order; returns the number of flips.
    """
    boundary = em.boundary_vertices()
    val: dict[int, int] = {}
    edges = sorted(em.edge_set())
    for u, w in edges:
        val[u] = val.get(u, 0) + 1
        val[w] = val.get(w, 0) + 1

    def target(v):
        return 4 if v in boundary else 6

    flips = 0
    for a, b in edges:
        if a not in em.vf or b not in em.vf:
            continue
        fids = sorted(em.edge_faces(a, b))
        if len(fids) != 2:
            continue
        f1, f2 = (em.faces[fid] for fid in fids)
        # Identify which face runs a -> b; the other runs b -> a.
        if _has_directed(f1, a, b):
            c = _opposite(f1, a, b)
            d = _opposite(f2, a, b)
        else:
            c = _opposite(f2, a, b)
            d = _opposite(f1, a, b)
            fids = [fids[1], fids[0]]
        if em.edge_faces(c, d):
            continue  # the flipped edge already exists
        before = sum((val[v] - target(v)) ** 2 for v in (a, b, c, d))
        after = (
            (val[a] - 1 - target(a)) ** 2
            + (val[b] - 1 - target(b)) ** 2
            + (val[c] + 1 - target(c)) ** 2
            + (val[d] + 1 - target(d)) ** 2
        )
        if after >= before:
            continue
        n_old = em.face_normal_raw(em.faces[fids[0]]) + em.face_normal_raw(
            em.faces[fids[1]]
        )
        tri1, tri2 = (a, d, c), (b, c, d)
        n1 = em.face_normal_raw(tri1)
        n2 = em.face_normal_raw(tri2)
        if float(n1 @ n1) < 1e-24 or float(n2 @ n2) < 1e-24:
            continue
        if float(n1 @ n_old) <= 0.0 or float(n2 @ n_old) <= 0.0:
            continue
        for fid, tri in zip(fids, (tri1, tri2)):
            for vtx in em.faces[fid]:
                em.vf[vtx].discard(fid)
            em.faces[fid] = tri
            for vtx in tri:
                em.vf[vtx].add(fid)
        val[a] -= 1
        val[b] -= 1
        val[c] += 1
        val[d] += 1
        flips += 1
    return flips


def _has_directed(tri, a, b) -> bool:
    i = tri.index(a)
    return tri[(i + 1) % 3] == b


def _opposite(tri, a, b) -> int:
    return next(v for v in tri if v != a and v != b)


def tangential_smooth(mesh: TriMesh, lam: float) -> tuple[TriMesh, float]:
    """One Jacobi pass of area-weighted tangential smoothing.

    Every interior vertex moves by lam * (I - n n^T)(g - p), where g is the
    area-weighted average of its one-ring positions (weights are the
    neighbors' barycentric vertex areas) and n its vertex normal, so motion
    stays in the tangent plane.  Boundary vertices are pinned.  Returns the
    smoothed mesh and the largest |normal . displacement| residual.
    """
    if not (0 <= lam <= 1):
        raise InvalidArgumentError("lambda must lie in [0, 1]")
    v = mesh.vertices
    areas = mesh.vertex_areas
    normals = mesh.vertex_normals
    edges = mesh.edges
    both = np.concatenate([edges, edges[:, ::-1]])
    wsum = np.zeros(len(v))
    gsum = np.zeros_like(v)
    w = areas[both[:, 1]]
    np.add.at(wsum, both[:, 0], w)
    np.add.at(gsum, both[:, 0], w[:, None] * v[both[:, 1]])
    movable = (
        (wsum > 0)
        & ~mesh.boundary_vertex_mask
        & (np.linalg.norm(normals, axis=1) > 0.5)
    )
    g = np.where(movable[:, None], gsum / np.where(wsum > 0, wsum, 1.0)[:, None], v)
    diff = g - v
    normal_part = np.einsum("ij,ij->i", normals, diff)
    delta = lam * (diff - normal_part[:, None] * normals)
    delta[~movable] = 0.0
    out = TriMesh(v + delta, mesh.faces)
    residual = float(np.abs(np.einsum("ij,ij->i", normals, delta)).max()) if len(v) else 0.0
    return out, residual


def isotropic_remesh(
    mesh: TriMesh, params: RemeshParams, stats: list[RoundStats] | None = None
) -> TriMesh:
    """Drive the mesh toward uniform edge length `params.target_edge_length`.

    Runs `params.iterations` rounds of split / collapse / flip / smooth.
    When `stats` is given, one RoundStats entry is appended per round.
    """
    ell = params.target_edge_length
    high = params.split_factor * ell
    low = params.collapse_factor * ell
    for rnd in range(params.iterations):
        mesh = split_long_edges(mesh, high)
        em = _EditMesh(mesh)
        collapse_short_edges(em, low, high)
        equalize_valences(em)
        mesh = em.to_trimesh()
        mesh, _residual = tangential_smooth(mesh, params.smoothing)
        if stats is not None:
            stats.append(_round_stats(rnd, mesh))
    return mesh


def _round_stats(rnd: int, mesh: TriMesh) -> RoundStats:
    edges = mesh.edges
    lengths = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    interior = ~mesh.boundary_vertex_mask
    valences = np.zeros(mesh.n_vertices, dtype=np.int64)
    np.add.at(valences, edges.ravel(), 1)
    referenced = valences > 0
    pick = interior & referenced
    if not pick.any():
        pick = referenced
    mean_val = float(valences[pick].mean()) if pick.any() else 0.0
    return RoundStats(
        round=rnd,
        vertices=mesh.n_vertices,
        faces=mesh.n_faces,
        edges=len(edges),
        mean_edge=float(lengths.mean()) if len(lengths) else 0.0,
        mean_valence=mean_val,
        volume=mesh.enclosed_volume(),
    )
