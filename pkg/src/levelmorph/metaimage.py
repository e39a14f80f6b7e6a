"""Read and write a subset of the MetaImage (.mhd + .raw) volume format.

Only uncompressed, axis-aligned, 3D, little-endian payloads are handled.
Element types ``MET_UCHAR``, ``MET_FLOAT`` and ``MET_DOUBLE`` are supported.
Lines starting with ``#`` carry ``key = value`` annotations (used for
embedding provenance); they are returned by :func:`read_header`.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .grid import BinaryGrid3, ScalarGrid3

logger = logging.getLogger(__name__)

__all__ = ["VolumeFormatError", "read_header", "read_volume", "write_volume"]

ELEMENT_TYPES = {
    "MET_UCHAR": np.dtype("<u1"),
    "MET_FLOAT": np.dtype("<f4"),
    "MET_DOUBLE": np.dtype("<f8"),
}
KNOWN_KEYS = {
    "ObjectType",
    "NDims",
    "DimSize",
    "ElementSpacing",
    "Offset",
    "ElementType",
    "ElementByteOrderMSB",
    "BinaryDataByteOrderMSB",
    "BinaryData",
    "CompressedData",
    "ElementDataFile",
}


class VolumeFormatError(ValueError):
    """Malformed or unsupported volume file."""


def _parse_header(path: Path) -> tuple[dict[str, str], dict[str, str]]:
    fields: dict[str, str] = {}
    comments: dict[str, str] = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        target = fields
        if line.startswith("#"):
            line = line[1:].strip()
            target = comments
        if "=" not in line:
            if target is fields:
                raise VolumeFormatError(f"{path}: malformed header line {raw!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        target[key] = value
    return fields, comments


def read_header(path) -> dict:
    """Parse a header into a dict; ``#`` annotations land under ``"comments"``."""
    path = Path(path)
    fields, comments = _parse_header(path)
    for key in fields:
        if key not in KNOWN_KEYS:
            logger.warning("%s: ignoring unknown header key %r", path, key)

    def need(key):
        if key not in fields:
            raise VolumeFormatError(f"{path}: missing header key {key}")
        return fields[key]

    if fields.get("ObjectType", "Image") != "Image":
        raise VolumeFormatError(f"{path}: ObjectType must be Image")
    if int(need("NDims")) != 3:
        raise VolumeFormatError(f"{path}: only NDims = 3 is supported")
    if fields.get("CompressedData", "False").lower() == "true":
        raise VolumeFormatError(f"{path}: compressed payloads are not supported")
    msb = fields.get("ElementByteOrderMSB", fields.get("BinaryDataByteOrderMSB", "False"))
    if msb.lower() != "false":
        raise VolumeFormatError(f"{path}: big-endian payloads are not supported")
    etype = need("ElementType")
    if etype not in ELEMENT_TYPES:
        raise VolumeFormatError(f"{path}: unsupported ElementType {etype}")

    dims = tuple(int(v) for v in need("DimSize").split())
    spacing = tuple(float(v) for v in fields.get("ElementSpacing", "1 1 1").split())
    offset = tuple(float(v) for v in fields.get("Offset", "0 0 0").split())
    if len(dims) != 3 or len(spacing) != 3 or len(offset) != 3:
        raise VolumeFormatError(f"{path}: DimSize/ElementSpacing/Offset need 3 values")
    data_file = need("ElementDataFile")
    if data_file == "LOCAL":
        raise VolumeFormatError(f"{path}: inline (LOCAL) payloads are not supported")
    return {
        "dims": dims,
        "spacing": spacing,
        "origin": offset,
        "element_type": etype,
        "data_file": path.parent / data_file,
        "comments": comments,
    }


def read_volume(path) -> ScalarGrid3:
    """Load a volume as a :class:`ScalarGrid3` (values stay unflattened)."""
    header = read_header(path)
    data_path: Path = header["data_file"]
    if not data_path.exists():
        raise VolumeFormatError(f"raw payload {data_path} not found")
    dtype = ELEMENT_TYPES[header["element_type"]]
    payload = np.fromfile(data_path, dtype=dtype)
    n = int(np.prod(header["dims"]))
    if payload.size != n or data_path.stat().st_size != n * dtype.itemsize:
        raise VolumeFormatError(
            f"{data_path}: header expects {n} elements, payload holds "
            f"{data_path.stat().st_size / dtype.itemsize:g}"
        )
    values = payload.reshape(header["dims"], order="F")
    return ScalarGrid3(values, header["spacing"], header["origin"])


def _fmt(v: float) -> str:
    return repr(float(v))


def write_volume(path, grid, element_type: str | None = None, annotations: dict | None = None) -> Path:
    """Write ``grid`` as ``path`` (.mhd header) plus a sibling ``.raw`` payload.

    Binary grids default to ``MET_UCHAR`` and scalar grids to ``MET_DOUBLE``.
    Returns the header path.
    """
    path = Path(path)
    if path.suffix != ".mhd":
        path = path.with_suffix(".mhd")
    if element_type is None:
        element_type = "MET_UCHAR" if isinstance(grid, BinaryGrid3) else "MET_DOUBLE"
    if element_type not in ELEMENT_TYPES:
        raise VolumeFormatError(f"unsupported ElementType {element_type}")
    dtype = ELEMENT_TYPES[element_type]
    raw_path = path.with_suffix(".raw")

    lines = []
    for key, value in (annotations or {}).items():
        lines.append(f"# {key} = {value}")
    lines += [
        "ObjectType = Image",
        "NDims = 3",
        "DimSize = " + " ".join(str(n) for n in grid.dims),
        "ElementSpacing = " + " ".join(_fmt(h) for h in grid.spacing),
        "Offset = " + " ".join(_fmt(o) for o in grid.origin),
        f"ElementType = {element_type}",
        "ElementByteOrderMSB = False",
        f"ElementDataFile = {raw_path.name}",
    ]
    path.write_text("\n".join(lines) + "\n")
    np.asarray(grid.values).astype(dtype).ravel(order="F").tofile(raw_path)
    return path
