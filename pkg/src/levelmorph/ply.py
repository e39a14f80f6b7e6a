"""Binary little-endian PLY export/import for :class:`~levelmorph.mesh.TriMesh`.

Vertices carry float32 ``x, y, z`` plus one float32 property per scalar
channel; faces are ``list uchar int`` triples.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import TriMesh

__all__ = ["write_ply", "read_ply", "PlyFormatError"]


class PlyFormatError(ValueError):
    pass


_FACE_DTYPE = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])


def write_ply(path, mesh: TriMesh) -> Path:
    path = Path(path)
    names = ["x", "y", "z"] + list(mesh.vertex_scalars)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}"]
    header += [f"property float {n}" for n in names]
    header += [
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    vdtype = np.dtype([(n, "<f4") for n in names])
    verts = np.empty(mesh.n_vertices, dtype=vdtype)
    for a, n in enumerate("xyz"):
        verts[n] = mesh.vertices[:, a]
    for n, values in mesh.vertex_scalars.items():
        verts[n] = values
    faces = np.empty(mesh.n_triangles, dtype=_FACE_DTYPE)
    faces["n"] = 3
    faces["idx"] = mesh.triangles
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(verts.tobytes())
        fh.write(faces.tobytes())
    return path


def read_ply(path) -> TriMesh:
    """Read a PLY written by :func:`write_ply` (float32 vertex properties only)."""
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise PlyFormatError(f"{path}: not a PLY file")
    lines = data[:end].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in lines:
        raise PlyFormatError(f"{path}: only binary_little_endian PLY is supported")
    n_vert = n_face = 0
    names: list[str] = []
    current = None
    for line in lines:
        parts = line.split()
        if parts[:1] == ["element"]:
            current = parts[1]
            if current == "vertex":
                n_vert = int(parts[2])
            elif current == "face":
                n_face = int(parts[2])
        elif parts[:1] == ["property"] and current == "vertex":
            if parts[1] != "float":
                raise PlyFormatError(f"{path}: vertex property {parts[-1]} is not float32")
            names.append(parts[2])
    vdtype = np.dtype([(n, "<f4") for n in names])
    body = data[end + len(b"end_header\n") :]
    expect = n_vert * vdtype.itemsize + n_face * _FACE_DTYPE.itemsize
    if len(body) != expect:
        raise PlyFormatError(f"{path}: payload has {len(body)} bytes, expected {expect}")
    verts = np.frombuffer(body, dtype=vdtype, count=n_vert)
    faces = np.frombuffer(body, dtype=_FACE_DTYPE, count=n_face, offset=n_vert * vdtype.itemsize)
    if n_face and np.any(faces["n"] != 3):
        raise PlyFormatError(f"{path}: only triangular faces are supported")
    xyz = np.stack([verts[n].astype(np.float64) for n in "xyz"], axis=1) if n_vert else np.empty((0, 3))
    channels = {n: verts[n].astype(np.float64) for n in names if n not in ("x", "y", "z")}
    return TriMesh(xyz, faces["idx"].astype(np.int64), channels)
