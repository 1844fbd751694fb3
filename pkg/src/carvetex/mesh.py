"""Triangle mesh container with lazily cached derived quantities.

Vertices are float64 (V, 3); faces are int64 (F, 3) indices with
counterclockwise winding giving outward normals on closed meshes.
Derived arrays (normals, areas, edge tables, adjacency) are computed on
first access and cached; they are only valid while the arrays are left
unmodified, so treat TriMesh instances as immutable.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["TriMesh"]


class TriMesh:
    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise InvalidArgumentError("face index out of range")
            if np.any(
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            ):
                raise InvalidArgumentError("face repeats a vertex index")
        if not np.all(np.isfinite(vertices)):
            raise InvalidArgumentError("vertex coordinates must be finite")
        self.vertices = vertices
        self.faces = faces
        self._cache: dict[str, object] = {}

    # -- basic counts ------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def __repr__(self):
        return f"TriMesh({self.n_vertices} vertices, {self.n_faces} faces)"

    # -- geometry ----------------------------------------------------------

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def face_cross(self) -> np.ndarray:
        """Unnormalized face normals (cross products), shape (F, 3)."""

        def compute():
            v = self.vertices
            f = self.faces
            return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])

        return self._cached("face_cross", compute)

    @property
    def face_areas(self) -> np.ndarray:
        return self._cached(
            "face_areas", lambda: 0.5 * np.linalg.norm(self.face_cross, axis=1)
        )

    @property
    def face_normals(self) -> np.ndarray:
        """Unit face normals; zero vector for degenerate faces."""

        def compute():
            c = self.face_cross
            n = np.linalg.norm(c, axis=1)
            safe = np.where(n > 0, n, 1.0)
            return c / safe[:, None]

        return self._cached("face_normals", compute)

    @property
    def face_centroids(self) -> np.ndarray:
        return self._cached(
            "face_centroids", lambda: self.vertices[self.faces].mean(axis=1)
        )

    @property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted vertex normals, normalized; zero where degenerate."""

        def compute():
            acc = np.zeros_like(self.vertices)
            np.add.at(acc, self.faces.ravel(), np.repeat(self.face_cross, 3, axis=0))
            n = np.linalg.norm(acc, axis=1)
            safe = np.where(n > 0, n, 1.0)
            return acc / safe[:, None]

        return self._cached("vertex_normals", compute)

    @property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric vertex areas: one third of incident face areas."""

        def compute():
            acc = np.zeros(self.n_vertices)
            np.add.at(acc, self.faces.ravel(), np.repeat(self.face_areas / 3.0, 3))
            return acc

        return self._cached("vertex_areas", compute)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def enclosed_volume(self) -> float:
        """Signed volume via the divergence theorem; positive for outward winding."""
        v = self.vertices
        f = self.faces
        if len(f) == 0:
            return 0.0
        a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    # -- connectivity ------------------------------------------------------

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2) with a < b, lexicographically sorted."""
        return self._edge_tables()[0]

    @property
    def edge_face_counts(self) -> np.ndarray:
        """Number of incident faces per edge, aligned with `edges`."""
        return self._edge_tables()[1]

    @property
    def face_edge_ids(self) -> np.ndarray:
        """Edge id per face corner (F, 3); corner c holds edge (f[c], f[(c+1)%3])."""
        return self._edge_tables()[2]

    def _edge_tables(self):
        def compute():
            f = self.faces
            if len(f) == 0:
                return (
                    np.zeros((0, 2), dtype=np.int64),
                    np.zeros(0, dtype=np.int64),
                    np.zeros((0, 3), dtype=np.int64),
                )
            half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            und = np.sort(half, axis=1)
            edges, inverse, counts = np.unique(
                und, axis=0, return_inverse=True, return_counts=True
            )
            face_edge = inverse.reshape(3, -1).T
            return edges, counts, face_edge

        return self._cached("edge_tables", compute)

    @property
    def boundary_edges(self) -> np.ndarray:
        """Indices into `edges` of edges with exactly one incident face."""
        return self._cached(
            "boundary_edges", lambda: np.nonzero(self.edge_face_counts == 1)[0]
        )

    @property
    def boundary_vertex_mask(self) -> np.ndarray:
        def compute():
            mask = np.zeros(self.n_vertices, dtype=bool)
            be = self.edges[self.boundary_edges]
            mask[be.ravel()] = True
            return mask

        return self._cached("boundary_vertex_mask", compute)

    @property
    def nonmanifold_edge_count(self) -> int:
        return int(np.count_nonzero(self.edge_face_counts > 2))

    def is_edge_manifold(self) -> bool:
        return self.nonmanifold_edge_count == 0

    def is_closed(self) -> bool:
        return self.n_faces > 0 and bool(np.all(self.edge_face_counts == 2))

    def is_oriented(self) -> bool:
        """True when no directed edge appears in two faces with the same direction."""
        f = self.faces
        if len(f) == 0:
            return True
        half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        _, counts = np.unique(half, axis=0, return_counts=True)
        return bool(np.all(counts == 1))

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + self.n_faces

    @property
    def vertex_face_lists(self) -> list[np.ndarray]:
        """Face ids incident to each vertex."""

        def compute():
            order = np.argsort(self.faces.ravel(), kind="stable")
            fids = np.repeat(np.arange(self.n_faces), 3)[order]
            verts = self.faces.ravel()[order]
            splits = np.searchsorted(verts, np.arange(self.n_vertices + 1))
            return [fids[splits[v]: splits[v + 1]] for v in range(self.n_vertices)]

        return self._cached("vertex_face_lists", compute)

    @property
    def vertex_neighbor_lists(self) -> list[np.ndarray]:
        """Sorted unique one-ring vertex ids per vertex."""

        def compute():
            e = self.edges
            both = np.concatenate([e, e[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            both = both[order]
            splits = np.searchsorted(both[:, 0], np.arange(self.n_vertices + 1))
            return [both[splits[v]: splits[v + 1], 1] for v in range(self.n_vertices)]

        return self._cached("vertex_neighbor_lists", compute)

    @property
    def face_adjacency(self) -> np.ndarray:
        """Pairs of face ids (A, 2) sharing an edge, one row per shared pair."""

        def compute():
            eids = self.face_edge_ids.ravel()
            fids = np.repeat(np.arange(self.n_faces), 3)
            order = np.argsort(eids, kind="stable")
            eids, fids = eids[order], fids[order]
            counts = self.edge_face_counts
            splits = np.searchsorted(eids, np.arange(len(self.edges) + 1))
            # Vectorized fast path for ordinary interior edges (2 faces).
            two = np.nonzero(counts == 2)[0]
            pairs = [np.column_stack([fids[splits[two]], fids[splits[two] + 1]])]
            for e in np.nonzero(counts > 2)[0]:
                grp = fids[splits[e]: splits[e + 1]]
                ii, jj = np.triu_indices(len(grp), k=1)
                pairs.append(np.column_stack([grp[ii], grp[jj]]))
            return np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)

        return self._cached("face_adjacency", compute)

    def face_components(self) -> np.ndarray:
        """Component label per face; faces connected when sharing an edge."""
        labels = np.arange(self.n_faces)
        parent = labels.copy()

        def find(x):
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        for a, b in self.face_adjacency:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        out = np.array([find(i) for i in range(self.n_faces)])
        _, relabel = np.unique(out, return_inverse=True)
        return relabel

    def pinched_vertex_count(self) -> int:
        """Vertices whose incident faces split into more than one edge-connected fan."""
        count = 0
        vf = self.vertex_face_lists
        f = self.faces
        for v in range(self.n_vertices):
            fids = vf[v]
            if len(fids) <= 1:
                continue
            # Group incident faces by the edges through v that they share.
            adj: dict[int, list[int]] = {}
            for fi in fids:
                tri = f[fi]
                others = [x for x in tri if x != v]
                for o in others:
                    adj.setdefault(o, []).append(fi)
            seen: set[int] = set()
            comps = 0
            fid_set = set(int(x) for x in fids)
            neighbors: dict[int, set[int]] = {fi: set() for fi in fid_set}
            for shared in adj.values():
                for i in range(len(shared)):
                    for j in range(i + 1, len(shared)):
                        neighbors[shared[i]].add(shared[j])
                        neighbors[shared[j]].add(shared[i])
            for fi in fid_set:
                if fi in seen:
                    continue
                comps += 1
                stack = [fi]
                while stack:
                    cur = stack.pop()
                    if cur in seen:
                        continue
                    seen.add(cur)
                    stack.extend(neighbors[cur] - seen)
            if comps > 1:
                count += 1
        return count
