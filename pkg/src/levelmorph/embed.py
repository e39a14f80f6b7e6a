"""Implicit embeddings of binary volumes, negative inside the object.

Two constructions are provided: the Gaussian-blur embedding
``phi = T - G_sigma * I`` and the classic signed distance transform whose
staircase quantization motivates it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grid import BinaryGrid3, ScalarGrid3
from .metaimage import read_header, read_volume, write_volume
from .regularize import DEFAULT_THRESHOLD

__all__ = [
    "EmbeddingMethod",
    "Embedding",
    "GaussianKernel1D",
    "gaussian_kernel",
    "gaussian_embed",
    "sdt_embed",
    "rebinarize",
    "save_embedding",
    "load_embedding",
    "MissingProvenanceError",
]


class EmbeddingMethod(str, Enum):
    GAUSSIAN_BLUR = "GaussianBlur"
    SIGNED_DISTANCE = "SignedDistance"


class MissingProvenanceError(ValueError):
    """A volume was used as an embedding without knowing how it was built."""


@dataclass(frozen=True, eq=False)
class Embedding:
    field: ScalarGrid3
    method: EmbeddingMethod
    sigma: float | None = None
    T: float | None = None
    kernel_radius: tuple[int, int, int] | None = None
    inside_negative: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", EmbeddingMethod(self.method))
        if self.method is EmbeddingMethod.GAUSSIAN_BLUR and (self.sigma is None or self.T is None):
            raise ValueError("a Gaussian-blur embedding needs sigma and T")

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def spacing(self):
        return self.field.spacing

    @property
    def dims(self):
        return self.field.dims

    def annotations(self) -> dict[str, str]:
        ann = {"levelmorph.method": self.method.value}
        if self.method is EmbeddingMethod.GAUSSIAN_BLUR:
            ann["levelmorph.sigma_mm"] = repr(float(self.sigma))
            ann["levelmorph.T"] = repr(float(self.T))
        return ann


@dataclass(frozen=True)
class GaussianKernel1D:
    sigma: float
    taps: np.ndarray
    radius_voxels: int


def gaussian_kernel(sigma_mm: float, h_mm: float) -> GaussianKernel1D:
    """Sampled Gaussian truncated at ``ceil(4 sigma / h)`` voxels, unit sum."""
    if not sigma_mm > 0:
        raise ValueError(f"sigma must be positive, got {sigma_mm}")
    radius = max(1, math.ceil(4.0 * sigma_mm / h_mm))
    x = h_mm * np.arange(-radius, radius + 1)
    taps = np.exp(-0.5 * (x / sigma_mm) ** 2)
    taps = taps / math.fsum(taps)
    return GaussianKernel1D(float(sigma_mm), taps, radius)


def _check_flat(I: BinaryGrid3) -> None:
    if not isinstance(I, BinaryGrid3):
        raise TypeError("embedding needs a BinaryGrid3; flatten raw intensities first")


def gaussian_embed(I: BinaryGrid3, sigma_mm: float, T: float = DEFAULT_THRESHOLD) -> Embedding:
    """Blur the binary with a separable Gaussian (sigma in mm) and shift by T.

    Beyond the grid the image is continued by replicating edge voxels, so a
    grid whose border is all background behaves exactly as if padded with
    background.  Objects touching the border are therefore not shrunk
    artificially, but they stay open there; pad with
    :func:`levelmorph.grid.pad` first to close them.
    """
    _check_flat(I)
    if not sigma_mm > 0:
        raise ValueError(f"sigma must be positive, got {sigma_mm}")
    if not 0 < T < 1:
        raise ValueError(f"threshold T must lie in (0, 1), got {T}")
    blurred = I.values.astype(np.float64)
    radii = []
    for axis, h in enumerate(I.spacing):
        k = gaussian_kernel(sigma_mm, h)
        radii.append(k.radius_voxels)
        blurred = ndimage.correlate1d(blurred, k.taps, axis=axis, mode="nearest")
    phi = np.clip(T - blurred, T - 1.0, T)
    return Embedding(
        I.to_scalar().with_values(phi),
        EmbeddingMethod.GAUSSIAN_BLUR,
        sigma=float(sigma_mm),
        T=float(T),
        kernel_radius=tuple(radii),
    )


def sdt_embed(I: BinaryGrid3) -> Embedding:
    """Exact Euclidean signed distance between voxel centers (mm).

    Background voxels get the distance to the nearest foreground center,
    foreground voxels minus the distance to the nearest background center.
    """
    _check_flat(I)
    mask = I.values.astype(bool)
    if mask.all() or not mask.any():
        raise ValueError("signed distance needs both foreground and background voxels")
    sampling = tuple(I.spacing)
    outside = ndimage.distance_transform_edt(~mask, sampling=sampling)
    inside = ndimage.distance_transform_edt(mask, sampling=sampling)
    phi = np.where(mask, -inside, outside)
    return Embedding(I.to_scalar().with_values(phi), EmbeddingMethod.SIGNED_DISTANCE)


def rebinarize(e: Embedding) -> BinaryGrid3:
    """Recover a binary as the strict sublevel set ``phi < 0``."""
    f = e.field
    return BinaryGrid3((f.values < 0).astype(np.uint8), f.spacing, f.origin)


def save_embedding(path, e: Embedding) -> Path:
    return write_volume(path, e.field, "MET_DOUBLE", annotations=e.annotations())


def load_embedding(path, method: str | None = None, sigma: float | None = None, T: float | None = None) -> Embedding:
    """Read an embedding volume, taking provenance from its header annotations.

    Explicit arguments fill in (or override) missing annotations.  Without a
    known method the regularization units are ambiguous, so that is an error.
    """
    comments = read_header(path)["comments"]
    method = method or comments.get("levelmorph.method")
    if method is None:
        raise MissingProvenanceError(
            f"{path}: embedding method unknown; pass it explicitly (GaussianBlur or SignedDistance)"
        )
    method = EmbeddingMethod(method)
    if method is EmbeddingMethod.GAUSSIAN_BLUR:
        if sigma is None and "levelmorph.sigma_mm" in comments:
            sigma = float(comments["levelmorph.sigma_mm"])
        if T is None:
            T = float(comments.get("levelmorph.T", DEFAULT_THRESHOLD))
        if sigma is None:
            raise MissingProvenanceError(f"{path}: Gaussian embedding without sigma")
    return Embedding(read_volume(path), method, sigma=sigma, T=T)
