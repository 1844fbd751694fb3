"""Isotropic triangle remeshing: splits, collapses, flips, smoothing."""

from __future__ import annotations

import numpy as np
import pytest

from carvetex import InvalidArgumentError, RemeshParams, isotropic_remesh
from carvetex.mesh import TriMesh
from carvetex.remesh_tri import (
    RoundStats,
    _EditMesh,
    collapse_short_edges,
    equalize_valences,
    split_long_edges,
    tangential_smooth,
)


def edge_lengths(mesh: TriMesh) -> np.ndarray:
    e = mesh.edges
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)


def face_sets(mesh: TriMesh) -> set:
    return {tuple(sorted(f)) for f in mesh.faces}


def test_split_single_long_edge():
    mesh = TriMesh([[0, 0, 0], [2, 0, 0], [1, 0.2, 0]], [[0, 1, 2]])
    out = split_long_edges(mesh, threshold=1.5)
    assert out.n_vertices == 4
    assert out.n_faces == 2
    mid = out.vertices[3]
    assert np.allclose(mid, [1, 0, 0])
    assert face_sets(out) == {(0, 2, 3), (1, 2, 3)}


def test_split_shared_edge_keeps_mates_consistent():
    verts = [[0, 0, 0], [2, 0, 0], [1, 1, 0], [1, -1, 0]]
    mesh = TriMesh(verts, [[0, 1, 2], [1, 0, 3]])
    out = split_long_edges(mesh, threshold=1.5)
    assert out.n_vertices == 5
    assert out.n_faces == 4
    assert np.allclose(out.vertices[4], [1, 0, 0])
    assert out.is_oriented()
    assert out.nonmanifold_edge_count == 0
    # All four faces share the new midpoint.
    assert (out.faces == 4).any(axis=1).all()


def test_split_noop_below_threshold():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    out = split_long_edges(mesh, threshold=10.0)
    assert out is mesh


def test_split_terminates_and_preserves_area(plane):
    mesh = plane(3)
    out = split_long_edges(mesh, threshold=0.3)
    assert edge_lengths(out).max() <= 0.3
    assert out.face_areas.sum() == pytest.approx(1.0, abs=1e-12)
    assert out.is_oriented()
    assert out.euler_characteristic() == 1


def test_split_threshold_validation(plane):
    with pytest.raises(InvalidArgumentError):
        split_long_edges(plane(3), threshold=0.0)


def test_collapse_link_condition_blocks_extra_common_neighbor():
    # A is interior, B boundary; edge AB is the only short edge.  Without the
    # QCB face the midpoint collapse is legal; with it Q becomes a common
    # neighbor of A and B that is not an opposite vertex, so the collapse
    # would create a duplicated edge and must be rejected.
    verts = [
        [0, 0, 0],       # A
        [0.1, 0, 0],     # B
        [0, 1, 0],       # C
        [0, -1, 0],      # D
        [-1, 1, 0],      # Q
        [-1, -1, 0],     # R
    ]
    fan = [[0, 1, 2], [1, 0, 3], [0, 2, 4], [0, 4, 5], [0, 5, 3]]
    legal = _EditMesh(TriMesh(verts, fan))
    assert collapse_short_edges(legal, short=0.5, long=10.0) == 1

    blocked = _EditMesh(TriMesh(verts, fan + [[4, 2, 1]]))
    assert collapse_short_edges(blocked, short=0.5, long=10.0) == 0
    assert blocked.to_trimesh().n_faces == 6


def test_collapse_boundary_pinch_rejected():
    # Interior edge whose endpoints both lie on the boundary: collapsing it
    # would fuse the two boundary arcs of the diamond.
    verts = [[0, 0, 0], [0.1, 0, 0], [0.05, 1, 0], [0.05, -1, 0]]
    em = _EditMesh(TriMesh(verts, [[0, 1, 2], [1, 0, 3]]))
    assert collapse_short_edges(em, short=0.5, long=10.0) == 0


def test_collapse_long_edge_guard():
    verts = [
        [0, 0, 0],       # A
        [0.1, 0, 0],     # B
        [0, 1, 0],       # C
        [0, -1, 0],      # D
        [-1, 1, 0],      # Q
        [-1, -1, 0],     # R
    ]
    fan = [[0, 1, 2], [1, 0, 3], [0, 2, 4], [0, 4, 5], [0, 5, 3]]
    em = _EditMesh(TriMesh(verts, fan))
    # The midpoint sits ~1.40 from Q, so a 1.2 cap forbids the collapse.
    assert collapse_short_edges(em, short=0.5, long=1.2) == 0


def test_collapse_plane_stays_manifold(plane):
    mesh = plane(5)
    em = _EditMesh(mesh)
    count = collapse_short_edges(em, short=0.3, long=0.6)
    assert count > 0
    out = em.to_trimesh()
    assert out.n_vertices == mesh.n_vertices - count
    assert out.nonmanifold_edge_count == 0
    assert out.pinched_vertex_count() == 0
    assert out.euler_characteristic() == 1
    assert edge_lengths(out).max() <= 0.6 + 1e-12
    assert np.allclose(out.vertices[:, 2], 0.0)


def test_equalize_restores_flipped_diagonal(plane):
    mesh = plane(5)
    flipped_faces = []
    for f in mesh.faces:
        s = tuple(sorted(f))
        if s == (6, 11, 12):
            flipped_faces.append([6, 11, 7])
        elif s == (6, 7, 12):
            flipped_faces.append([11, 12, 7])
        else:
            flipped_faces.append(list(f))
    flipped = TriMesh(mesh.vertices, flipped_faces)
    assert face_sets(flipped) != face_sets(mesh)

    em = _EditMesh(flipped)
    assert equalize_valences(em) == 1
    out = em.to_trimesh()
    assert face_sets(out) == face_sets(mesh)
    assert (out.face_normals[:, 2] > 0).all()


def test_equalize_leaves_regular_plane_alone(plane):
    em = _EditMesh(plane(5))
    assert equalize_valences(em) == 0


def test_tangential_smooth_moves_in_plane(plane):
    mesh = plane(6)
    rng = np.random.default_rng(7)
    verts = mesh.vertices.copy()
    interior = ~mesh.boundary_vertex_mask
    verts[interior, :2] += rng.uniform(-0.05, 0.05, (interior.sum(), 2))
    jittered = TriMesh(verts, mesh.faces)

    out, residual = tangential_smooth(jittered, 0.5)
    assert residual < 1e-9
    assert np.allclose(out.vertices[:, 2], 0.0)
    boundary = mesh.boundary_vertex_mask
    assert np.array_equal(out.vertices[boundary], verts[boundary])
    moved = np.linalg.norm(out.vertices[interior] - verts[interior], axis=1)
    assert moved.max() > 1e-4


def test_tangential_smooth_lambda():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    out, residual = tangential_smooth(mesh, 0.0)
    assert np.array_equal(out.vertices, mesh.vertices)
    assert residual == 0.0
    for lam in (-0.1, 1.5):
        with pytest.raises(InvalidArgumentError):
            tangential_smooth(mesh, lam)


def test_isotropic_remesh_plane(plane):
    mesh = plane(8)
    stats: list[RoundStats] = []
    params = RemeshParams(target_edge_length=0.1, iterations=3)
    out = isotropic_remesh(mesh, params, stats=stats)

    assert len(stats) == 3
    assert [s.round for s in stats] == [0, 1, 2]
    assert all(s.faces == out.n_faces for s in stats[-1:])
    row = stats[0].csv_row()
    assert row.startswith("0,")
    assert len(row.split(",")) == 5

    assert np.allclose(out.vertices[:, 2], 0.0)
    assert out.euler_characteristic() == 1
    assert out.nonmanifold_edge_count == 0
    lengths = edge_lengths(out)
    assert 0.06 < lengths.mean() < 0.15
    lo = np.min(out.vertices[:, :2], axis=0)
    hi = np.max(out.vertices[:, :2], axis=0)
    assert (lo >= -1e-12).all() and (hi <= 1.0 + 1e-12).all()


def test_remesh_params_validation():
    with pytest.raises(InvalidArgumentError):
        RemeshParams(target_edge_length=0.0)
    with pytest.raises(InvalidArgumentError):
        RemeshParams(target_edge_length=0.1, iterations=-1)
    with pytest.raises(InvalidArgumentError):
        RemeshParams(target_edge_length=0.1, split_factor=0.9)
    with pytest.raises(InvalidArgumentError):
        RemeshParams(target_edge_length=0.1, collapse_factor=1.1)
    with pytest.raises(InvalidArgumentError):
        RemeshParams(target_edge_length=0.1, smoothing=1.5)
