"""Occupancy fields: analytic membership, boolean ops, sampling, trilinear queries."""

from __future__ import annotations

import numpy as np
import pytest

from carvetex import (
    Box,
    Difference,
    GridField,
    InvalidArgumentError,
    OutOfRangeError,
    Sphere,
    Torus,
    Union,
    sample_grid,
)
from carvetex.field import query


def manual_trilinear(grid: GridField, p: np.ndarray) -> float:
    """Independent trilinear interpolation used as the oracle for query()."""
    rel = (np.asarray(p, dtype=np.float64) - grid.origin) / grid.spacing
    base = np.minimum(np.floor(rel).astype(int), np.asarray(grid.dims) - 2)
    base = np.maximum(base, 0)
    t = rel - base
    total = 0.0
    for cx in (0, 1):
        for cy in (0, 1):
            for cz in (0, 1):
                w = (
                    (t[0] if cx else 1 - t[0])
                    * (t[1] if cy else 1 - t[1])
                    * (t[2] if cz else 1 - t[2])
                )
                total += w * grid.values[base[0] + cx, base[1] + cy, base[2] + cz]
    return total


def test_sphere_membership():
    s = Sphere(center=(1.0, 0.0, 0.0), radius=0.5)
    assert query(s, (1.0, 0.0, 0.0)) == 1.0
    assert query(s, (1.5, 0.0, 0.0)) == 1.0  # boundary counts as inside
    assert query(s, (1.51, 0.0, 0.0)) == 0.0
    batch = query(s, np.array([[1.2, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    assert np.array_equal(batch, [1.0, 0.0])


def test_box_membership():
    b = Box(center=(0.0, 0.0, 0.0), half_extents=(1.0, 2.0, 3.0))
    assert query(b, (1.0, 2.0, 3.0)) == 1.0
    assert query(b, (1.0001, 0.0, 0.0)) == 0.0
    assert query(b, (-1.0, -2.0, -3.0)) == 1.0


def test_torus_membership():
    t = Torus(center=(0.0, 0.0, 0.0), major_radius=1.0, minor_radius=0.25)
    assert query(t, (1.0, 0.0, 0.0)) == 1.0  # tube center
    assert query(t, (0.0, 0.0, 0.0)) == 0.0  # hole
    assert query(t, (0.0, 1.0, 0.2)) == 1.0
    assert query(t, (1.0, 0.0, 0.26)) == 0.0
    assert query(t, (1.25, 0.0, 0.0)) == 1.0
    assert query(t, (1.26, 0.0, 0.0)) == 0.0


def test_union_and_difference():
    a = Sphere(center=(0.0, 0.0, 0.0), radius=1.0)
    b = Sphere(center=(3.0, 0.0, 0.0), radius=1.0)
    u = Union(parts=(a, b))
    assert query(u, (0.0, 0.0, 0.0)) == 1.0
    assert query(u, (3.0, 0.0, 0.0)) == 1.0
    assert query(u, (1.5, 0.0, 0.0)) == 0.0

    hollow = Difference(base=a, cut=Sphere(center=(0.0, 0.0, 0.0), radius=0.5))
    assert query(hollow, (0.0, 0.0, 0.0)) == 0.0
    assert query(hollow, (0.75, 0.0, 0.0)) == 1.0
    assert query(hollow, (2.0, 0.0, 0.0)) == 0.0


def test_invalid_shape_parameters_raise():
    with pytest.raises(InvalidArgumentError):
        Sphere(radius=0.0)
    with pytest.raises(InvalidArgumentError):
        Sphere(radius=-1.0)
    with pytest.raises(InvalidArgumentError):
        Box(half_extents=(1.0, 0.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        Torus(major_radius=0.2, minor_radius=0.25)
    with pytest.raises(InvalidArgumentError):
        Union(parts=())


def test_sample_grid_matches_analytic_at_lattice_points():
    field = Sphere(center=(0.5, 0.5, 0.5), radius=0.3)
    grid = sample_grid(field, (9, 9, 9), (0.0, 0.0, 0.0), 0.125)
    assert grid.dims == (9, 9, 9)
    assert grid.spacing == 0.125
    assert np.array_equal(grid.upper, [1.0, 1.0, 1.0])
    idx = np.stack(np.meshgrid(*[np.arange(9)] * 3, indexing="ij"), axis=-1)
    pts = idx.reshape(-1, 3) * 0.125
    assert np.array_equal(grid.values.ravel(), field.occupancy(pts))


def test_sample_grid_validation():
    field = Sphere(radius=1.0)
    with pytest.raises(InvalidArgumentError):
        sample_grid(field, (1, 4, 4), (0, 0, 0), 0.1)
    with pytest.raises(InvalidArgumentError):
        sample_grid(field, (4, 4, 4), (0, 0, 0), 0.0)


def test_grid_field_validation():
    ok = np.zeros((2, 2, 2))
    with pytest.raises(InvalidArgumentError):
        GridField((2, 2, 2), (0, 0, 0), 1.0, np.full((2, 2, 2), 1.5))
    with pytest.raises(InvalidArgumentError):
        GridField((2, 2, 2), (0, 0, 0), 1.0, np.full((2, 2, 2), -0.1))
    with pytest.raises(InvalidArgumentError):
        GridField((2, 2, 3), (0, 0, 0), 1.0, ok)
    with pytest.raises(InvalidArgumentError):
        GridField((2, 2, 2), (0, 0, 0), -1.0, ok)


def test_grid_query_cell_center_is_corner_mean():
    rng = np.random.default_rng(3)
    vals = rng.uniform(size=(2, 2, 2))
    grid = GridField((2, 2, 2), (0.0, 0.0, 0.0), 1.0, vals)
    assert query(grid, (0.5, 0.5, 0.5)) == pytest.approx(vals.mean(), abs=1e-12)


def test_grid_query_trilinear_random_points():
    rng = np.random.default_rng(11)
    vals = rng.uniform(size=(3, 4, 5))
    grid = GridField((3, 4, 5), (-1.0, 0.0, 2.0), 0.5, vals)
    lo, hi = grid.origin, grid.upper
    pts = lo + rng.uniform(size=(50, 3)) * (hi - lo)
    got = query(grid, pts)
    want = np.array([manual_trilinear(grid, p) for p in pts])
    assert np.abs(got - want).max() < 1e-12
    # Lattice points reproduce stored values exactly.
    assert query(grid, tuple(lo)) == vals[0, 0, 0]
    assert query(grid, tuple(hi)) == vals[-1, -1, -1]


def test_grid_query_out_of_range():
    grid = GridField((2, 2, 2), (0.0, 0.0, 0.0), 1.0, np.zeros((2, 2, 2)))
    with pytest.raises(OutOfRangeError):
        query(grid, (1.01, 0.5, 0.5))
    with pytest.raises(OutOfRangeError):
        query(grid, (-0.01, 0.0, 0.0))


def test_query_rejects_unknown_field():
    with pytest.raises(InvalidArgumentError):
        query(object(), (0.0, 0.0, 0.0))
