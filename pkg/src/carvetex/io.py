"""File formats: Wavefront OBJ meshes, RGBA PNG images, and voxel grids.

OBJ support covers v / vt / f records with triangles and quads, negative
(relative) indices, and per-corner texture coordinates.  Normals in the
input are tolerated and ignored; writes never emit them.  Floats are
written with six significant digits and records in a fixed order, so a
given mesh always serializes to identical bytes.

The voxel format is a single file: an ASCII header followed by the raw
values as little-endian float32 in x-fastest order::

    CARVEVOX1
    dims 64 64 64
    origin -0.5 -0.5 -0.5
    spacing 0.015873015873015872
    data
    <nx*ny*nz little-endian float32>

Header floats are written with repr-style shortest round-trip precision,
so read(write(grid)) reproduces origin and spacing exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError, ParseError
from .field import GridField
from .mesh import TriMesh

__all__ = [
    "ObjDocument",
    "read_obj",
    "load_trimesh",
    "write_obj",
    "read_png",
    "write_png",
    "read_vox",
    "write_vox",
]

VOX_MAGIC = "CARVEVOX1"


# -- OBJ ---------------------------------------------------------------------


@dataclass
class ObjDocument:
    """Parsed OBJ content: positions, optional UVs, and polygon faces.

    Each face is a tuple of (vertex_index, uv_index_or_None) corners with
    zero-based indices.  Comments (without the leading '#') are kept in
    file order.
    """

    vertices: np.ndarray
    uvs: np.ndarray | None
    faces: list[tuple[tuple[int, int | None], ...]]
    comments: list[str] = dataclass_field(default_factory=list)

    def to_trimesh(self) -> tuple[TriMesh, np.ndarray | None]:
        """Triangulate (fan order) into a TriMesh plus per-corner UVs.

        Returns (mesh, uv) where uv has shape (F, 3, 2) when every corner
        carries a texture coordinate, else None.
        """
        tris: list[tuple[int, int, int]] = []
        uv_tris: list[tuple[int, int, int]] = []
        has_uv = self.uvs is not None and all(
            t is not None for face in self.faces for _, t in face
        )
        for face in self.faces:
            for k in range(1, len(face) - 1):
                tris.append((face[0][0], face[k][0], face[k + 1][0]))
                if has_uv:
                    uv_tris.append((face[0][1], face[k][1], face[k + 1][1]))
        mesh = TriMesh(self.vertices, np.asarray(tris, dtype=np.int64).reshape(-1, 3))
        uv = self.uvs[np.asarray(uv_tris, dtype=np.int64)] if has_uv and uv_tris else None
        return mesh, uv


def _resolve_index(raw: int, count: int, lineno: int, what: str) -> int:
    if raw == 0:
        raise ParseError(f"{what} index 0 is not allowed", lineno)
    idx = raw - 1 if raw > 0 else count + raw
    if not (0 <= idx < count):
        raise ParseError(f"{what} index {raw} out of range (have {count})", lineno)
    return idx


def read_obj(path) -> ObjDocument:
    """Parse an OBJ file; malformed records raise ParseError with the line."""
    vertices: list[tuple[float, float, float]] = []
    uvs: list[tuple[float, float]] = []
    faces: list[tuple[tuple[int, int | None], ...]] = []
    comments: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex needs 3 coordinates", lineno)
                try:
                    vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError:
                    raise ParseError(f"bad vertex coordinate in {line!r}", lineno) from None
            elif tag == "vt":
                if len(parts) < 3:
                    raise ParseError("texture coordinate needs 2 components", lineno)
                try:
                    uvs.append((float(parts[1]), float(parts[2])))
                except ValueError:
                    raise ParseError(f"bad texture coordinate in {line!r}", lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ParseError("face needs at least 3 corners", lineno)
                corners = []
                for corner in parts[1:]:
                    fields = corner.split("/")
                    try:
                        vi = int(fields[0])
                    except ValueError:
                        raise ParseError(f"bad face corner {corner!r}", lineno) from None
                    v = _resolve_index(vi, len(vertices), lineno, "vertex")
                    t = None
                    if len(fields) > 1 and fields[1]:
                        try:
                            ti = int(fields[1])
                        except ValueError:
                            raise ParseError(f"bad face corner {corner!r}", lineno) from None
                        t = _resolve_index(ti, len(uvs), lineno, "uv")
                    # A third field (normal index) is tolerated and ignored.
                    corners.append((v, t))
                faces.append(tuple(corners))
            elif tag in ("vn", "g", "o", "s", "usemtl", "mtllib"):
                continue
            else:
                raise ParseError(f"unrecognized record {tag!r}", lineno)
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    uv_arr = np.asarray(uvs, dtype=np.float64).reshape(-1, 2) if uvs else None
    return ObjDocument(verts, uv_arr, faces, comments)


def load_trimesh(path) -> tuple[TriMesh, np.ndarray | None]:
    """Read an OBJ and triangulate; convenience over read_obj."""
    return read_obj(path).to_trimesh()


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_obj(path, mesh, uv=None, comments=()) -> None:
    """Write a mesh as OBJ with deterministic formatting.

    `mesh` is a TriMesh or any object with `vertices` plus `faces` (and
    optionally `quads` and `tris` for mixed quad meshes).  `uv` is an
    optional per-corner array shaped (F, k, 2) aligned with the faces; UVs
    are deduplicated exactly before writing.
    """
    vertices = np.asarray(mesh.vertices, dtype=np.float64)
    if hasattr(mesh, "quads"):
        polys: list[tuple[int, ...]] = [tuple(q) for q in mesh.quads]
        polys += [tuple(t) for t in mesh.tris]
    else:
        polys = [tuple(f) for f in mesh.faces]
    lines = [f"# carvetex mesh: {len(vertices)} vertices, {len(polys)} faces"]
    for c in comments:
        lines.append(f"# {c}")
    for v in vertices:
        lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    uv_index = None
    if uv is not None:
        uv = np.asarray(uv, dtype=np.float64)
        flat = uv.reshape(-1, 2)
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        first = np.full(len(uniq), len(flat), dtype=np.int64)
        np.minimum.at(first, inverse, np.arange(len(flat)))
        order = np.argsort(first, kind="stable")
        rank = np.empty(len(uniq), dtype=np.int64)
        rank[order] = np.arange(len(uniq))
        for t in uniq[order]:
            lines.append(f"vt {_fmt(t[0])} {_fmt(t[1])}")
        uv_index = rank[inverse].reshape(uv.shape[:2])
    for fi, poly in enumerate(polys):
        if uv_index is not None:
            corners = " ".join(f"{v + 1}/{uv_index[fi, k] + 1}" for k, v in enumerate(poly))
        else:
            corners = " ".join(str(v + 1) for v in poly)
        lines.append(f"f {corners}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- PNG ---------------------------------------------------------------------


def write_png(path, image: np.ndarray) -> None:
    """Write an (H, W, 4) uint8 array as RGBA PNG."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 4:
        raise InvalidArgumentError(f"expected (H, W, 4) uint8 image, got {image.dtype} {image.shape}")
    Image.fromarray(image, mode="RGBA").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Read any PNG as an (H, W, 4) uint8 RGBA array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8)


# -- voxel grids --------------------------------------------------------------


def write_vox(path, grid: GridField) -> None:
    nx, ny, nz = grid.dims
    ox, oy, oz = (repr(float(x)) for x in grid.origin)
    header = (
        f"{VOX_MAGIC}\n"
        f"dims {nx} {ny} {nz}\n"
        f"origin {ox} {oy} {oz}\n"
        f"spacing {repr(float(grid.spacing))}\n"
        f"data\n"
    )
    payload = np.ascontiguousarray(
        grid.values.astype("<f4").ravel(order="F")
    ).tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def read_vox(path) -> GridField:
    with open(path, "rb") as fh:
        blob = fh.read()
    lines = []
    pos = 0
    for _ in range(5):
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise ParseError("truncated header", len(lines) + 1)
        lines.append(blob[pos:nl].decode("ascii", errors="replace"))
        pos = nl + 1
    if lines[0] != VOX_MAGIC:
        raise ParseError(f"bad magic {lines[0]!r}, expected {VOX_MAGIC!r}", 1)
    try:
        tag, *dims = lines[1].split()
        assert tag == "dims" and len(dims) == 3
        dims = tuple(int(d) for d in dims)
    except (ValueError, AssertionError):
        raise ParseError(f"bad dims record {lines[1]!r}", 2) from None
    try:
        tag, *org = lines[2].split()
        assert tag == "origin" and len(org) == 3
        origin = tuple(float(x) for x in org)
    except (ValueError, AssertionError):
        raise ParseError(f"bad origin record {lines[2]!r}", 3) from None
    try:
        tag, sp = lines[3].split()
        assert tag == "spacing"
        spacing = float(sp)
    except (ValueError, AssertionError):
        raise ParseError(f"bad spacing record {lines[3]!r}", 4) from None
    if lines[4] != "data":
        raise ParseError(f"expected 'data', got {lines[4]!r}", 5)
    count = dims[0] * dims[1] * dims[2]
    payload = blob[pos:]
    if len(payload) != 4 * count:
        raise ParseError(
            f"payload holds {len(payload)} bytes, expected {4 * count}", 6
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    values = values.reshape(dims, order="F")
    try:
        return GridField(dims, origin, spacing, values)
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), 6) from None
