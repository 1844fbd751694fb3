"""Occupancy fields: analytic solids, set operators, and sampled voxel grids.

An occupancy field maps a point in R^3 to a scalar in [0, 1].  Analytic
fields are hard indicators (0 or 1); grid fields interpolate stored lattice
values trilinearly.  Points exactly on an analytic surface may report either
side; callers must not rely on boundary membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import InvalidArgumentError, OutOfRangeError

__all__ = [
    "AnalyticField",
    "Sphere",
    "Box",
    "Torus",
    "Union",
    "Difference",
    "GridField",
    "sample_grid",
    "query",
]


def _as_points(p) -> tuple[np.ndarray, bool]:
    """Coerce to an (n, 3) float array; report whether input was a single point."""
    a = np.asarray(p, dtype=np.float64)
    if a.ndim == 1:
        if a.shape != (3,):
            raise InvalidArgumentError(f"point must have 3 components, got shape {a.shape}")
        return a[None, :], True
    if a.ndim != 2 or a.shape[1] != 3:
        raise InvalidArgumentError(f"points must have shape (n, 3), got {a.shape}")
    return a, False


class AnalyticField:
    """Base class for hard-indicator occupancy fields."""

    def occupancy(self, p: np.ndarray) -> np.ndarray:
        """Evaluate occupancy at points `p` of shape (..., 3); returns 0.0/1.0."""
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(AnalyticField):
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError(f"sphere radius must be positive, got {self.radius}")

    def occupancy(self, p):
        pts, single = _as_points(p)
        d2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=1)
        out = (d2 <= self.radius * self.radius).astype(np.float64)
        return out[0] if single else out


@dataclass(frozen=True)
class Box(AnalyticField):
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_extents: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not all(h > 0 for h in self.half_extents):
            raise InvalidArgumentError(f"box half extents must be positive, got {self.half_extents}")

    def occupancy(self, p):
        pts, single = _as_points(p)
        inside = np.all(
            np.abs(pts - np.asarray(self.center)) <= np.asarray(self.half_extents), axis=1
        )
        out = inside.astype(np.float64)
        return out[0] if single else out


@dataclass(frozen=True)
class Torus(AnalyticField):
    """Solid torus around the z axis through `center`.

    `major_radius` is the distance from the axis to the tube center,
    `minor_radius` the tube radius; requires 0 < minor < major.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    major_radius: float = 1.0
    minor_radius: float = 0.25

    def __post_init__(self):
        if not (0 < self.minor_radius < self.major_radius):
            raise InvalidArgumentError(
                f"torus needs 0 < minor < major, got minor={self.minor_radius} major={self.major_radius}"
            )

    def occupancy(self, p):
        pts, single = _as_points(p)
        rel = pts - np.asarray(self.center)
        ring = np.hypot(rel[:, 0], rel[:, 1]) - self.major_radius
        d2 = ring * ring + rel[:, 2] ** 2
        out = (d2 <= self.minor_radius * self.minor_radius).astype(np.float64)
        return out[0] if single else out


@dataclass(frozen=True)
class Union(AnalyticField):
    parts: tuple[AnalyticField, ...]

    def __post_init__(self):
        if len(self.parts) == 0:
            raise InvalidArgumentError("union needs at least one part")

    def occupancy(self, p):
        pts, single = _as_points(p)
        acc = np.zeros(len(pts))
        for part in self.parts:
            acc = np.maximum(acc, part.occupancy(pts))
        return acc[0] if single else acc


@dataclass(frozen=True)
class Difference(AnalyticField):
    base: AnalyticField
    cut: AnalyticField

    def occupancy(self, p):
        pts, single = _as_points(p)
        out = self.base.occupancy(pts) * (1.0 - self.cut.occupancy(pts))
        return out[0] if single else out


@dataclass
class GridField:
    """Voxel occupancy on a regular lattice.

    `values[i, j, k]` lives at `origin + spacing * (i, j, k)`; all values
    must be finite and inside [0, 1].
    """

    dims: tuple[int, int, int]
    origin: np.ndarray
    spacing: float
    values: np.ndarray = dataclass_field(repr=False)

    def __init__(self, dims, origin, spacing, values):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d < 2 for d in dims):
            raise InvalidArgumentError(f"grid dims must be >= 2 per axis, got {dims}")
        if not spacing > 0:
            raise InvalidArgumentError(f"grid spacing must be positive, got {spacing}")
        values = np.asarray(values, dtype=np.float64)
        if values.shape != dims:
            raise InvalidArgumentError(f"values shape {values.shape} does not match dims {dims}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise InvalidArgumentError("grid values must be finite and within [0, 1]")
        self.dims = dims
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3).copy()
        self.spacing = float(spacing)
        self.values = values

    @property
    def upper(self) -> np.ndarray:
        """Coordinates of the last lattice point on each axis."""
        return self.origin + self.spacing * (np.asarray(self.dims) - 1)


def sample_grid(field: AnalyticField, dims, origin, spacing) -> GridField:
    """Evaluate an analytic field on a regular lattice.

    Parameters
    ----------
    field : AnalyticField
    dims : (3,) ints, lattice points per axis, each >= 2.
    origin : (3,) floats, position of lattice point (0, 0, 0).
    spacing : float, lattice step, > 0.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise InvalidArgumentError(f"dims must be >= 2 per axis, got {dims}")
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    axes = [origin[a] + spacing * np.arange(dims[a]) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    vals = field.occupancy(pts).reshape(dims)
    return GridField(dims, origin, spacing, vals)


def query(field, p):
    """Evaluate a field at point(s) `p`.

    Analytic fields return exact membership.  Grid fields interpolate
    trilinearly; points outside the lattice bounding box raise
    OutOfRangeError.  Accepts a single (3,) point or an (n, 3) batch.
    """
    if isinstance(field, AnalyticField):
        return field.occupancy(p)
    if isinstance(field, GridField):
        return _query_grid(field, p)
    raise InvalidArgumentError(f"unsupported field type {type(field).__name__}")


def _query_grid(grid: GridField, p):
    pts, single = _as_points(p)
    lo, hi = grid.origin, grid.upper
    if np.any(pts < lo) or np.any(pts > hi):
        bad = pts[np.any((pts < lo) | (pts > hi), axis=1)][0]
        raise OutOfRangeError(f"point {tuple(bad)} outside grid bounds {tuple(lo)}..{tuple(hi)}")
    rel = (pts - lo) / grid.spacing
    n = np.asarray(grid.dims)
    base = np.minimum(np.floor(rel).astype(np.int64), n - 2)
    base = np.maximum(base, 0)
    f = rel - base
    i, j, k = base[:, 0], base[:, 1], base[:, 2]
    v = grid.values
    c000 = v[i, j, k]
    c100 = v[i + 1, j, k]
    c010 = v[i, j + 1, k]
    c110 = v[i + 1, j + 1, k]
    c001 = v[i, j, k + 1]
    c101 = v[i + 1, j, k + 1]
    c011 = v[i, j + 1, k + 1]
    c111 = v[i + 1, j + 1, k + 1]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    return out[0] if single else out
