"""Zero-isosurface meshes, vertex sampling, histograms and mesh-side oracles.

The mesh-based area, volume and V - E + F are computed independently of the
regularized integrals and serve as a cross-check on them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from skimage.measure import marching_cubes as _skimage_marching_cubes

from .embed import Embedding
from .grid import ScalarGrid3

logger = logging.getLogger(__name__)

__all__ = [
    "TriMesh",
    "EulerResult",
    "Histogram",
    "marching_cubes",
    "sample_at_vertices",
    "trilinear",
    "mesh_area",
    "mesh_volume",
    "euler_from_mesh",
    "histogram",
    "iqr",
]

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle surface in mm; triangles wind counter-clockwise seen from phi > 0."""

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_scalars: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        for name, values in self.vertex_scalars.items():
            if len(values) != len(v):
                raise ValueError(f"channel {name!r} has {len(values)} values for {len(v)} vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def with_channel(self, name: str, values) -> "TriMesh":
        channels = dict(self.vertex_scalars)
        channels[name] = np.asarray(values, dtype=np.float64)
        return replace(self, vertex_scalars=channels)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def marching_cubes(e: Embedding | ScalarGrid3) -> TriMesh:
    """Triangulate the zero level set with the classic Lorensen-Cline table.

    Vertices are linear interpolations of the zero crossing along cell edges
    and are shared between neighbouring cells.  A single-signed field yields
    an empty mesh.
    """
    f = e.field if isinstance(e, Embedding) else e
    phi = f.values
    if min(phi.shape) < 2 or not (phi.min() < 0 < phi.max()):
        return TriMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    # skimage "descent" winds triangles to face increasing phi (outward here)
    verts, faces, _, _ = _skimage_marching_cubes(
        phi,
        level=0.0,
        spacing=tuple(f.spacing),
        gradient_direction="descent",
        method="lorensen",
        allow_degenerate=False,
    )
    verts = verts.astype(np.float64) + np.asarray(f.origin)
    mesh = TriMesh(verts, faces.astype(np.int64))
    keep = mesh.triangle_areas() > DEGENERATE_AREA
    if not keep.all():
        mesh = _drop_triangles(mesh, keep)
    return mesh


def _drop_triangles(mesh: TriMesh, keep: np.ndarray) -> TriMesh:
    tris = mesh.triangles[keep]
    used = np.unique(tris)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    channels = {k: v[used] for k, v in mesh.vertex_scalars.items()}
    return TriMesh(mesh.vertices[used], remap[tris], channels)


def trilinear(field: ScalarGrid3, points_mm: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of a grid field at physical points."""
    pts = np.asarray(points_mm, dtype=np.float64).reshape(-1, 3)
    vals = field.values
    dims = np.array(field.dims)
    idx = (pts - np.asarray(field.origin)) / np.asarray(field.spacing)
    tol = 1e-9
    if np.any(idx < -tol) or np.any(idx > dims - 1 + tol):
        raise ValueError("point outside the grid")
    idx = np.clip(idx, 0, dims - 1)
    base = np.minimum(np.floor(idx).astype(np.int64), np.maximum(dims - 2, 0))
    frac = idx - base
    out = np.zeros(len(pts))
    for corner in range(8):
        offs = np.array([(corner >> a) & 1 for a in range(3)])
        w = np.ones(len(pts))
        ijk = []
        for a in range(3):
            if dims[a] == 1:
                if offs[a]:
                    w = w * 0.0
                ijk.append(np.zeros(len(pts), dtype=np.int64))
                continue
            w = w * (frac[:, a] if offs[a] else 1.0 - frac[:, a])
            ijk.append(base[:, a] + offs[a])
        out += w * vals[ijk[0], ijk[1], ijk[2]]
    return out


def sample_at_vertices(mesh: TriMesh, field: ScalarGrid3, name: str) -> TriMesh:
    """Attach a trilinearly interpolated grid field as vertex channel ``name``."""
    return mesh.with_channel(name, trilinear(field, mesh.vertices))


def mesh_area(mesh: TriMesh) -> float:
    """Sum of triangle areas (mm^2)."""
    return float(np.sum(mesh.triangle_areas())) if mesh.n_triangles else 0.0


def mesh_volume(mesh: TriMesh) -> float:
    """Enclosed volume from signed tetrahedra against the origin (mm^3)."""
    if mesh.is_empty:
        return 0.0
    a, b, c = (mesh.vertices[mesh.triangles[:, i]] for i in range(3))
    return abs(float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0)


def signed_mesh_volume(mesh: TriMesh) -> float:
    if mesh.is_empty:
        return 0.0
    a, b, c = (mesh.vertices[mesh.triangles[:, i]] for i in range(3))
    return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0


@dataclass(frozen=True)
class EulerResult:
    chi: int
    V: int
    E: int
    F: int
    boundary_edges: int
    non_manifold_edges: int

    @property
    def closed(self) -> bool:
        return self.boundary_edges == 0 and self.non_manifold_edges == 0


def _edge_counts(triangles: np.ndarray) -> np.ndarray:
    if len(triangles) == 0:
        return np.empty(0, dtype=np.int64)
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges.sort(axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


def euler_from_mesh(mesh: TriMesh) -> EulerResult:
    """``V - E + F`` with edges counted as an undirected set.

    Edges used by one triangle (holes) or by more than two (non-manifold)
    are counted and reported alongside.
    """
    counts = _edge_counts(mesh.triangles)
    V = int(len(np.unique(mesh.triangles))) if mesh.n_triangles else 0
    E, F = int(len(counts)), mesh.n_triangles
    res = EulerResult(
        chi=V - E + F,
        V=V,
        E=E,
        F=F,
        boundary_edges=int(np.count_nonzero(counts == 1)),
        non_manifold_edges=int(np.count_nonzero(counts > 2)),
    )
    if res.non_manifold_edges:
        logger.warning("mesh has %d non-manifold edges", res.non_manifold_edges)
    return res


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def mode_bin(self) -> tuple[float, float]:
        i = int(np.argmax(self.counts))
        return float(self.bin_edges[i]), float(self.bin_edges[i + 1])

    def to_csv(self) -> str:
        lines = [
            f"# underflow,{self.underflow}",
            f"# overflow,{self.overflow}",
            "bin_left_edge,count",
        ]
        lines += [f"{edge!r},{int(c)}" for edge, c in zip(self.bin_edges[:-1].tolist(), self.counts)]
        return "\n".join(lines) + "\n"


def histogram(values, bins: int, range: tuple[float, float]) -> Histogram:
    """Uniform bins over ``[lo, hi)``; samples outside go to under/overflow."""
    lo, hi = (float(r) for r in range)
    if int(bins) < 1 or not lo < hi:
        raise ValueError(f"invalid histogram spec bins={bins} range=({lo}, {hi})")
    bins = int(bins)
    values = np.asarray(values, dtype=np.float64).ravel()
    edges = np.linspace(lo, hi, bins + 1)
    under = int(np.count_nonzero(values < lo))
    over = int(np.count_nonzero(values >= hi))
    inside = values[(values >= lo) & (values < hi)]
    idx = np.searchsorted(edges, inside, side="right") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.int64)
    return Histogram(edges, counts, under, over)


def iqr(values) -> float:
    """Interquartile range (75th minus 25th percentile)."""
    q1, q3 = np.percentile(np.asarray(values, dtype=np.float64), [25, 75])
    return float(q3 - q1)
