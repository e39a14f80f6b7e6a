"""Raster containers with physical geometry, padding and synthetic shapes.

Arrays are indexed ``values[i, j, k]`` with ``i`` along x.  A voxel is a
point sample at its center and ``origin`` is the physical position (mm) of
voxel ``(0, 0, 0)``.  Serialized payloads use x-fastest order (see
:mod:`levelmorph.metaimage`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Spacing3",
    "ScalarGrid3",
    "BinaryGrid3",
    "ShapeClippedError",
    "flatten_binary",
    "pad",
    "synth_sphere",
    "synth_torus",
    "fit_dims",
]

AXES = {"x": 0, "y": 1, "z": 2}


class ShapeClippedError(ValueError):
    """Raised when a synthetic shape does not fit inside its domain."""


class Spacing3(NamedTuple):
    hx: float
    hy: float
    hz: float

    @property
    def voxel_volume(self) -> float:
        return self.hx * self.hy * self.hz


def _as_spacing(spacing) -> Spacing3:
    if np.isscalar(spacing):
        spacing = (spacing,) * 3
    sp = Spacing3(*(float(h) for h in spacing))
    if not all(math.isfinite(h) and h > 0 for h in sp):
        raise ValueError(f"spacing must be positive and finite, got {tuple(sp)}")
    return sp


def _as_triple(v, name: str) -> tuple[float, float, float]:
    if np.isscalar(v):
        v = (v,) * 3
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"{name} needs 3 components, got {len(t)}")
    return t


@dataclass(frozen=True, eq=False)
class _Grid3:
    values: np.ndarray
    spacing: Spacing3 = Spacing3(1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def _check_geometry(self) -> None:
        object.__setattr__(self, "spacing", _as_spacing(self.spacing))
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError(f"expected a non-empty 3D array, got shape {self.values.shape}")
        self.values.setflags(write=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.values.shape)

    @property
    def voxel_volume(self) -> float:
        return self.spacing.voxel_volume

    def axis_coords(self, axis: int) -> np.ndarray:
        """Physical voxel-center coordinates (mm) along one axis."""
        return self.origin[axis] + self.spacing[axis] * np.arange(self.values.shape[axis])

    def mesh_coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (x, y, z) coordinate arrays."""
        x, y, z = (self.axis_coords(a) for a in range(3))
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def same_geometry(self, other: "_Grid3") -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def __eq__(self, other) -> bool:
        return (
            type(self) is type(other)
            and self.same_geometry(other)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScalarGrid3(_Grid3):
    """3D raster of finite real values with anisotropic spacing in mm."""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        self._check_geometry()
        if not np.all(np.isfinite(values)):
            raise ValueError("ScalarGrid3 values must be finite")

    def with_values(self, values) -> "ScalarGrid3":
        return ScalarGrid3(values, self.spacing, self.origin)

    @classmethod
    def adopt(cls, values: np.ndarray, like: "_Grid3") -> "ScalarGrid3":
        """Wrap a freshly computed float64 array without copying it.

        The array is frozen in place; callers must not keep a writable alias.
        """
        if values.dtype != np.float64 or values.shape != like.values.shape:
            return cls(values, like.spacing, like.origin)
        if not np.all(np.isfinite(values)):
            raise ValueError("ScalarGrid3 values must be finite")
        obj = object.__new__(cls)
        object.__setattr__(obj, "values", values)
        object.__setattr__(obj, "spacing", like.spacing)
        object.__setattr__(obj, "origin", like.origin)
        values.setflags(write=False)
        return obj


@dataclass(frozen=True, eq=False)
class BinaryGrid3(_Grid3):
    """3D raster restricted to {0, 1}; the segmented object is 1."""

    def __post_init__(self):
        raw = np.asarray(self.values)
        if not np.all((raw == 0) | (raw == 1)):
            raise ValueError("BinaryGrid3 values must be 0 or 1; use flatten_binary first")
        object.__setattr__(self, "values", np.array(raw, dtype=np.uint8))
        self._check_geometry()

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def foreground_volume(self) -> float:
        """Voxel count times voxel volume (mm^3)."""
        return self.count * self.voxel_volume

    def to_scalar(self) -> ScalarGrid3:
        return ScalarGrid3(self.values.astype(np.float64), self.spacing, self.origin)


def flatten_binary(raw: ScalarGrid3 | BinaryGrid3, fg_threshold: float = 0.5) -> BinaryGrid3:
    """Map ``raw > fg_threshold`` to 1 and everything else to 0.

    Segmentations are often stored at the top of their dynamic range (255 for
    unsigned bytes), which has to be flattened before embedding.
    """
    return BinaryGrid3(
        (np.asarray(raw.values) > fg_threshold).astype(np.uint8), raw.spacing, raw.origin
    )


def pad(grid, margin_voxels, fill: float = 0.0):
    """Grow ``grid`` by ``margin`` voxels on both sides of every axis.

    The origin moves by ``-margin * spacing`` so interior voxels keep their
    physical positions.
    """
    margin = tuple(int(m) for m in (np.broadcast_to(margin_voxels, (3,))))
    if any(m < 0 for m in margin):
        raise ValueError(f"margins must be >= 0, got {margin}")
    if isinstance(grid, BinaryGrid3) and fill not in (0, 1):
        raise ValueError("binary grids can only be padded with 0 or 1")
    values = np.pad(
        grid.values, [(m, m) for m in margin], mode="constant", constant_values=fill
    )
    origin = tuple(o - m * h for o, m, h in zip(grid.origin, margin, grid.spacing))
    return type(grid)(values, grid.spacing, origin)


def fit_dims(half_extent_mm: Sequence[float], spacing, margin_mm: float) -> tuple[int, int, int]:
    """Smallest odd voxel counts holding a centered box of the given half extents."""
    sp = _as_spacing(spacing)
    dims = []
    for half, h in zip(half_extent_mm, sp):
        n = 2 * math.ceil((half + margin_mm) / h) + 1
        dims.append(int(n))
    return tuple(dims)


def _domain(dims, spacing, origin):
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    sp = _as_spacing(spacing)
    org = _as_triple(origin, "origin")
    lo = np.array(org)
    hi = lo + (np.array(dims) - 1) * np.array(sp)
    return dims, sp, org, lo, hi


def _default_center(lo, hi, center):
    if center is None:
        return tuple(float(c) for c in (lo + hi) / 2)
    return _as_triple(center, "center")


def _check_inside(box_lo, box_hi, lo, hi, what: str) -> None:
    if np.any(box_lo <= lo) or np.any(box_hi >= hi):
        raise ShapeClippedError(
            f"{what} spans {box_lo.round(4).tolist()}..{box_hi.round(4).tolist()} mm, "
            f"outside the voxel-center extent {lo.round(4).tolist()}..{hi.round(4).tolist()} mm"
        )


def synth_sphere(radius_mm, center_mm=None, dims=(1, 1, 1), spacing=1.0, origin=(0, 0, 0)):
    """Rasterize a solid ball: voxel is 1 iff its center lies within the radius."""
    dims, sp, org, lo, hi = _domain(dims, spacing, origin)
    if not radius_mm > 0.5 * min(sp):
        raise ValueError(f"radius {radius_mm} mm is below half a voxel")
    c = np.array(_default_center(lo, hi, center_mm))
    _check_inside(c - radius_mm, c + radius_mm, lo, hi, "sphere")
    grid = BinaryGrid3(np.zeros(dims, np.uint8), sp, org)
    x, y, z = grid.mesh_coords()
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    return BinaryGrid3((r2 <= radius_mm**2).astype(np.uint8), sp, org)


def synth_torus(
    inner_radius_mm,
    outer_radius_mm,
    center_mm=None,
    axis="z",
    dims=(1, 1, 1),
    spacing=1.0,
    origin=(0, 0, 0),
):
    """Rasterize a solid torus symmetric about ``axis``.

    Ring radius is the mean of the two radii and the tube radius half their
    difference.
    """
    if not 0 < inner_radius_mm < outer_radius_mm:
        raise ValueError("torus needs 0 < inner radius < outer radius")
    ax = AXES[axis] if isinstance(axis, str) else int(axis)
    dims, sp, org, lo, hi = _domain(dims, spacing, origin)
    ring = 0.5 * (outer_radius_mm + inner_radius_mm)
    tube = 0.5 * (outer_radius_mm - inner_radius_mm)
    c = np.array(_default_center(lo, hi, center_mm))
    half = np.full(3, outer_radius_mm)
    half[ax] = tube
    _check_inside(c - half, c + half, lo, hi, "torus")

    grid = BinaryGrid3(np.zeros(dims, np.uint8), sp, org)
    coords = [g - ci for g, ci in zip(grid.mesh_coords(), c)]
    w = coords[ax]
    u, v = (coords[a] for a in range(3) if a != ax)
    rho = np.sqrt(u**2 + v**2)
    inside = (rho - ring) ** 2 + w**2 <= tube**2
    return BinaryGrid3(inside.astype(np.uint8), sp, org)
