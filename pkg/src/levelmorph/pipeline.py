"""End-to-end helpers shared by the CLI and the acceptance checks."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .diffgeo import CurvatureFields, curvature_fields, derivatives
from .embed import Embedding, EmbeddingMethod, gaussian_embed, sdt_embed
from .grid import BinaryGrid3, pad
from .integrate import MorphReport, morphometry, params_for
from .mesh import TriMesh, iqr, marching_cubes, sample_at_vertices
from .regularize import DEFAULT_THRESHOLD, epsilon_for_sdt

__all__ = [
    "THREADS_ENV",
    "default_workers",
    "embedding_margin",
    "embed_binary",
    "Analysis",
    "analyse",
    "analyse_embedding",
    "surface_mesh",
    "thickness_sweep",
    "sigma_sweep",
    "compare_embeddings",
]

THREADS_ENV = "LEVELMORPH_THREADS"
STENCIL_GUARD = 3


def default_workers() -> int:
    """Worker threads allowed by ``LEVELMORPH_THREADS`` (serial when unset)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def embedding_margin(method: EmbeddingMethod | str, spacing, sigma: float | None = None, t: float | None = None):
    """Background voxels to add per axis so the surface and its shell are not clipped."""
    method = EmbeddingMethod(method)
    if method is EmbeddingMethod.GAUSSIAN_BLUR:
        reach = 4.0 * sigma
    else:
        reach = epsilon_for_sdt(t) if t else 0.0
    return tuple(math.ceil(reach / h) + STENCIL_GUARD for h in spacing)


def embed_binary(
    I: BinaryGrid3,
    method: EmbeddingMethod | str = EmbeddingMethod.GAUSSIAN_BLUR,
    sigma: float | None = None,
    T: float = DEFAULT_THRESHOLD,
    t: float | None = None,
    margin=None,
) -> Embedding:
    """Pad with background, then embed."""
    method = EmbeddingMethod(method)
    if method is EmbeddingMethod.SIGNED_DISTANCE and (I.count == 0 or I.count == I.values.size):
        raise ValueError("signed distance needs both foreground and background voxels")
    if margin is None:
        margin = embedding_margin(method, I.spacing, sigma, t)
    padded = pad(I, margin, 0)
    if method is EmbeddingMethod.GAUSSIAN_BLUR:
        if sigma is None:
            raise ValueError("Gaussian embedding needs sigma")
        return gaussian_embed(padded, sigma, T)
    return sdt_embed(padded)


@dataclass(frozen=True, eq=False)
class Analysis:
    embedding: Embedding
    fields: CurvatureFields
    report: MorphReport


def analyse_embedding(e: Embedding, t: float, workers: int = 1, principal: bool = False) -> Analysis:
    fields = curvature_fields(derivatives(e), principal=principal, workers=workers)
    return Analysis(e, fields, morphometry(e, params_for(e, t), fields, workers))


def analyse(
    I: BinaryGrid3,
    method: EmbeddingMethod | str = EmbeddingMethod.GAUSSIAN_BLUR,
    sigma: float | None = None,
    T: float = DEFAULT_THRESHOLD,
    t: float = 2.5,
    workers: int = 1,
) -> Analysis:
    e = embed_binary(I, method, sigma, T, t)
    return analyse_embedding(e, t, workers)


def surface_mesh(e: Embedding, fields: CurvatureFields | None = None, channels=("H", "K")) -> TriMesh:
    """Zero-isosurface mesh with curvature channels sampled at its vertices."""
    mesh = marching_cubes(e)
    if mesh.is_empty or not channels:
        for name in channels:
            mesh = mesh.with_channel(name, np.empty(mesh.n_vertices))
        return mesh
    if fields is None:
        fields = curvature_fields(e)
    available = {"H": fields.H, "K": fields.K}
    if fields.kappa1 is not None:
        available.update(kappa1=fields.kappa1, kappa2=fields.kappa2)
    for name in channels:
        if name not in available:
            raise ValueError(f"unknown channel {name!r}; choose from {sorted(available)}")
        mesh = sample_at_vertices(mesh, available[name], name)
    return mesh


def thickness_sweep(e: Embedding, thicknesses, workers: int = 1) -> list[tuple[float, MorphReport]]:
    """Morphometry of one embedding at several regularization thicknesses."""
    fields = curvature_fields(derivatives(e), workers=workers)
    return [(float(t), morphometry(e, params_for(e, t), fields, workers)) for t in thicknesses]


def sigma_sweep(
    I: BinaryGrid3, sigmas, t: float, T: float = DEFAULT_THRESHOLD, workers: int = 1
) -> list[tuple[float, MorphReport]]:
    """Morphometry over blur widths; every embedding shares the widest padding."""
    sigmas = [float(s) for s in sigmas]
    margin = embedding_margin(EmbeddingMethod.GAUSSIAN_BLUR, I.spacing, max(sigmas))
    padded = pad(I, margin, 0)
    out = []
    for s in sigmas:
        e = gaussian_embed(padded, s, T)
        out.append((s, analyse_embedding(e, t, workers).report))
        del e
    return out


def compare_embeddings(
    I: BinaryGrid3, sigma: float, t: float, T: float = DEFAULT_THRESHOLD, workers: int = 1
) -> dict:
    """Run the Gaussian and signed-distance pipelines side by side.

    Returns both reports and the vertex mean-curvature spread of each, with
    the SDT / Gaussian interquartile-range ratio.
    """
    result = {}
    for key, method in (("gaussian", EmbeddingMethod.GAUSSIAN_BLUR), ("sdt", EmbeddingMethod.SIGNED_DISTANCE)):
        a = analyse(I, method, sigma if key == "gaussian" else None, T, t, workers)
        mesh = surface_mesh(a.embedding, a.fields, channels=("H",))
        H = mesh.vertex_scalars["H"]
        result[key] = {
            "report": a.report,
            "vertex_H_mean": float(np.mean(H)) if H.size else None,
            "vertex_H_std": float(np.std(H)) if H.size else None,
            "vertex_H_iqr": iqr(H) if H.size else None,
            "n_vertices": mesh.n_vertices,
        }
    g, s = result["gaussian"]["vertex_H_iqr"], result["sdt"]["vertex_H_iqr"]
    result["iqr_ratio_sdt_over_gaussian"] = s / g if g and s is not None else None
    return result
