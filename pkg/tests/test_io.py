"""File formats: OBJ meshes, RGBA PNGs, and the voxel grid container."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from carvetex import InvalidArgumentError, ParseError
from carvetex.field import GridField
from carvetex.io import (
    load_trimesh,
    read_obj,
    read_png,
    read_vox,
    write_obj,
    write_png,
    write_vox,
)
from carvetex.mesh import TriMesh


def test_obj_round_trip(tmp_path):
    # Coordinates chosen to survive 6-significant-digit formatting.
    verts = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.125, -2.5, 0.001],
        ]
    )
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    path = tmp_path / "mesh.obj"
    write_obj(path, TriMesh(verts, faces), comments=["unit square", "two faces"])
    doc = read_obj(path)
    assert np.array_equal(doc.vertices, verts)
    assert [tuple(v for v, _ in f) for f in doc.faces] == [(0, 1, 2), (1, 3, 2)]
    assert "unit square" in doc.comments and "two faces" in doc.comments
    mesh, uv = doc.to_trimesh()
    assert uv is None
    assert np.array_equal(mesh.vertices, verts)
    assert np.array_equal(mesh.faces, faces)


def test_obj_uv_round_trip(tmp_path):
    verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [1.0, 1, 0]])
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    uv = np.array(
        [
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        ]
    )
    path = tmp_path / "textured.obj"
    write_obj(path, TriMesh(verts, faces), uv=uv)
    doc = read_obj(path)
    # Shared corners deduplicate to 4 unique uv records.
    assert doc.uvs.shape == (4, 2)
    mesh, uv_back = doc.to_trimesh()
    assert np.array_equal(mesh.faces, faces)
    assert np.array_equal(uv_back, uv)


def test_obj_deterministic_bytes(tmp_path):
    verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
    mesh = TriMesh(verts, np.array([[0, 1, 2]]))
    a, b = tmp_path / "a.obj", tmp_path / "b.obj"
    write_obj(a, mesh)
    write_obj(b, mesh)
    assert a.read_bytes() == b.read_bytes()


def test_obj_negative_indices(tmp_path):
    path = tmp_path / "rel.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    doc = read_obj(path)
    assert [tuple(v for v, _ in f) for f in doc.faces] == [(0, 1, 2)]


def test_obj_quad_fan_triangulation(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh, _ = load_trimesh(path)
    assert np.array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_obj_tolerated_records(tmp_path):
    path = tmp_path / "tagged.obj"
    path.write_text(
        "mtllib scene.mtl\no thing\ng group\ns off\nusemtl mat\n"
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n"
    )
    doc = read_obj(path)
    assert len(doc.faces) == 1
    assert doc.faces[0] == ((0, None), (1, None), (2, None))


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("v 1 2\n", 1, "3 coordinates"),
        ("v a b c\n", 1, "bad vertex"),
        ("vt 0.5\n", 1, "2 components"),
        ("v 0 0 0\nv 1 0 0\nf 1 2\n", 3, "at least 3"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", 4, "index 0"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", 4, "out of range"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", 4, "bad face corner"),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/9 2 3\n", 4, "out of range"),
        ("curve 1 2 3\n", 1, "unrecognized"),
    ],
)
def test_obj_parse_errors(tmp_path, text, line, fragment):
    path = tmp_path / "bad.obj"
    path.write_text(text)
    with pytest.raises(ParseError, match=fragment) as excinfo:
        read_obj(path)
    assert excinfo.value.line == line


def test_write_obj_quad_mesh(tmp_path):
    verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 1, 0], [0.0, 1, 0], [2.0, 0, 0]])
    quadmesh = SimpleNamespace(
        vertices=verts, quads=np.array([[0, 1, 2, 3]]), tris=np.array([[1, 4, 2]])
    )
    path = tmp_path / "mixed.obj"
    write_obj(path, quadmesh)
    lines = path.read_text().splitlines()
    assert "f 1 2 3 4" in lines
    assert "f 2 5 3" in lines
    doc = read_obj(path)
    assert [len(f) for f in doc.faces] == [4, 3]


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, size=(16, 24, 4), dtype=np.uint8)
    path = tmp_path / "img.png"
    write_png(path, image)
    assert np.array_equal(read_png(path), image)


def test_png_validation(tmp_path):
    with pytest.raises(InvalidArgumentError):
        write_png(tmp_path / "x.png", np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(InvalidArgumentError):
        write_png(tmp_path / "x.png", np.zeros((4, 4, 4), dtype=np.float32))


def test_vox_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    dims = (3, 4, 5)
    values = rng.uniform(0.0, 1.0, size=dims)
    grid = GridField(dims, origin=(-0.5, 0.1, 2.0 / 3.0), spacing=1.0 / 7.0, values=values)
    path = tmp_path / "grid.vox"
    write_vox(path, grid)
    back = read_vox(path)
    assert back.dims == dims
    # Header floats use shortest round-trip repr, so these are exact.
    assert np.array_equal(back.origin, grid.origin)
    assert back.spacing == grid.spacing
    assert np.array_equal(back.values, values.astype(np.float32).astype(np.float64))


@pytest.mark.parametrize(
    "mangle, line, fragment",
    [
        (lambda b: b"VOXELS99" + b[9:], 1, "bad magic"),
        (lambda b: b.replace(b"dims 3 4 5", b"dims 3 4"), 2, "bad dims"),
        (lambda b: b.replace(b"origin", b"origin x"), 3, "bad origin"),
        (lambda b: b.replace(b"spacing ", b"spacing x"), 4, "bad spacing"),
        (lambda b: b.replace(b"\ndata\n", b"\nbody\n"), 5, "expected 'data'"),
        (lambda b: b[:-4], 6, "payload"),
        (lambda b: b.replace(b"dims 3 4 5", b"dims 1 4 15"), 6, "dims must be"),
    ],
)
def test_vox_parse_errors(tmp_path, mangle, line, fragment):
    grid = GridField((3, 4, 5), origin=(0, 0, 0), spacing=0.5, values=np.zeros((3, 4, 5)))
    path = tmp_path / "grid.vox"
    write_vox(path, grid)
    blob = mangle(path.read_bytes())
    bad = tmp_path / "bad.vox"
    bad.write_bytes(blob)
    with pytest.raises(ParseError, match=fragment) as excinfo:
        read_vox(bad)
    assert excinfo.value.line == line


def test_vox_truncated_header(tmp_path):
    path = tmp_path / "short.vox"
    path.write_bytes(b"CARVEVOX1\ndims 2 2 2\n")
    with pytest.raises(ParseError, match="truncated"):
        read_vox(path)


def test_vox_out_of_range_values(tmp_path):
    grid = GridField((2, 2, 2), origin=(0, 0, 0), spacing=1.0, values=np.zeros((2, 2, 2)))
    path = tmp_path / "grid.vox"
    write_vox(path, grid)
    blob = bytearray(path.read_bytes())
    blob[-4:] = np.float32(2.0).tobytes()
    path.write_bytes(bytes(blob))
    with pytest.raises(ParseError, match="within"):
        read_vox(path)
