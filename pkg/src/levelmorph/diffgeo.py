"""Fourth-order finite differences and curvature fields of an embedding.

Interior points use centered 5-point stencils.  The two outermost layers on
each side use one-sided stencils of the same order (5 points for first
derivatives, 6 points for second derivatives when the axis allows it), so no
ghost values are invented.  Mixed derivatives are the composition of two
first-derivative passes, which in the interior is exactly the 16-point
tensor-product stencil.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .embed import Embedding
from .grid import ScalarGrid3

__all__ = [
    "DerivativeBundle",
    "CurvatureFields",
    "GRADIENT_FLOOR",
    "fd_weights",
    "diff_axis",
    "derivatives",
    "normals",
    "mean_curvature",
    "gaussian_curvature",
    "principal_curvatures",
    "curvature_fields",
]

# Curvature is masked where |grad phi| < GRADIENT_FLOOR * max |grad phi|.
GRADIENT_FLOOR = 1e-4
# Gradients below this multiple of max|phi| / min(h) are stencil round-off.
ROUNDOFF_FLOOR = 1e-12
# Discriminants H^2 - K within this fraction of max(H^2, |K|) count as umbilic.
UMBILIC_TOL = 1e-12
MIN_AXIS = 5


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple[int, ...], order: int) -> tuple[float, ...]:
    """Weights ``w`` with ``sum(w_k f(k)) ~ f^(order)(0)`` for unit spacing.

    Solves the Taylor (Vandermonde) system for the given integer offsets.
    """
    k = np.asarray(offsets, dtype=np.float64)
    n = k.size
    A = np.vander(k, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return tuple(np.linalg.solve(A, rhs))


CENTRAL = {
    1: (1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12),
    2: (-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12),
}


def diff_axis(a: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    """First or second derivative of ``a`` along ``axis`` with spacing ``h``."""
    n = a.shape[axis]
    if n < MIN_AXIS:
        raise ValueError(f"need at least {MIN_AXIS} samples along axis {axis}, got {n}")
    src = np.moveaxis(a, axis, 0)
    out = np.empty(src.shape, dtype=np.float64)
    w = CENTRAL[order]
    interior = out[2 : n - 2]
    np.multiply(src[0 : n - 4], w[0], out=interior)
    for j in range(1, 5):
        if w[j]:
            interior += w[j] * src[j : n - 4 + j]

    width = 5 if order == 1 or n < 6 else 6
    for i in (0, 1, n - 2, n - 1):
        start = 0 if i < 2 else n - width
        ww = fd_weights(tuple(range(start - i, start - i + width)), order)
        acc = ww[0] * src[start]
        for j in range(1, width):
            acc = acc + ww[j] * src[start + j]
        out[i] = acc
    out /= h**order
    return np.ascontiguousarray(np.moveaxis(out, 0, axis))


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """First, pure second, and mixed derivatives in physical units (per mm)."""

    phi_x: ScalarGrid3
    phi_y: ScalarGrid3
    phi_z: ScalarGrid3
    phi_xx: ScalarGrid3
    phi_yy: ScalarGrid3
    phi_zz: ScalarGrid3
    phi_xy: ScalarGrid3
    phi_yz: ScalarGrid3
    phi_zx: ScalarGrid3
    noise: float = 0.0

    @property
    def first(self):
        return self.phi_x, self.phi_y, self.phi_z

    @property
    def second(self):
        return self.phi_xx, self.phi_yy, self.phi_zz

    @property
    def mixed(self):
        return self.phi_xy, self.phi_yz, self.phi_zx

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k).values for k in _ORDER}

    def gradnorm(self) -> np.ndarray:
        gx, gy, gz = (g.values for g in self.first)
        return np.sqrt(gx * gx + gy * gy + gz * gz)


def derivatives(e: Embedding | ScalarGrid3) -> DerivativeBundle:
    """Dense fourth-order derivative fields of an embedding."""
    f = e.field if isinstance(e, Embedding) else e
    phi = f.values
    hx, hy, hz = f.spacing
    wrap = lambda a: ScalarGrid3.adopt(a, f)  # noqa: E731
    px = diff_axis(phi, 0, hx, 1)
    py = diff_axis(phi, 1, hy, 1)
    pz = diff_axis(phi, 2, hz, 1)
    return DerivativeBundle(
        phi_x=wrap(px),
        phi_y=wrap(py),
        phi_z=wrap(pz),
        phi_xx=wrap(diff_axis(phi, 0, hx, 2)),
        phi_yy=wrap(diff_axis(phi, 1, hy, 2)),
        phi_zz=wrap(diff_axis(phi, 2, hz, 2)),
        phi_xy=wrap(diff_axis(px, 1, hy, 1)),
        phi_yz=wrap(diff_axis(py, 2, hz, 1)),
        phi_zx=wrap(diff_axis(pz, 0, hx, 1)),
        noise=ROUNDOFF_FLOOR * float(np.max(np.abs(phi))) / min(f.spacing),
    )


def _valid_mask(gradnorm: np.ndarray, floor: float = GRADIENT_FLOOR, noise: float = 0.0) -> np.ndarray:
    gmax = float(gradnorm.max()) if gradnorm.size else 0.0
    return (gradnorm >= floor * gmax) & (gradnorm > noise)


def normals(d: DerivativeBundle, floor: float = GRADIENT_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Unit normals ``grad phi / |grad phi|`` as a (3, nx, ny, nz) array plus validity mask.

    Masked voxels hold a zero vector.
    """
    g = np.stack([c.values for c in d.first])
    norm = d.gradnorm()
    valid = _valid_mask(norm, floor, d.noise)
    safe = np.where(valid, norm, 1.0)
    return np.where(valid, g / safe, 0.0), valid


def _mean_curvature(px, py, pz, pxx, pyy, pzz, pxy, pyz, pzx, valid):
    g2 = px * px + py * py + pz * pz
    num = (
        (pyy + pzz) * px * px
        + (pzz + pxx) * py * py
        + (pxx + pyy) * pz * pz
        - 2.0 * px * py * pxy
        - 2.0 * pz * px * pzx
        - 2.0 * py * pz * pyz
    )
    den = np.where(valid, g2 * np.sqrt(g2), 1.0)
    return np.where(valid, 0.5 * num / den, 0.0)


def _gaussian_curvature(px, py, pz, pxx, pyy, pzz, pxy, pyz, pzx, valid):
    g2 = px * px + py * py + pz * pz
    num = (
        px * px * (pyy * pzz - pyz * pyz)
        + py * py * (pxx * pzz - pzx * pzx)
        + pz * pz * (pxx * pyy - pxy * pxy)
        + 2.0 * px * py * (pzx * pyz - pxy * pzz)
        + 2.0 * py * pz * (pxy * pzx - pyz * pxx)
        + 2.0 * pz * px * (pxy * pyz - pzx * pyy)
    )
    den = np.where(valid, g2 * g2, 1.0)
    return np.where(valid, num / den, 0.0)


_ORDER = ("phi_x", "phi_y", "phi_z", "phi_xx", "phi_yy", "phi_zz", "phi_xy", "phi_yz", "phi_zx")


def _pointwise(kernel, d: DerivativeBundle, valid: np.ndarray, workers: int = 1) -> np.ndarray:
    """Evaluate an elementwise curvature expression slab by slab along x."""
    arrays = [getattr(d, k).values for k in _ORDER]
    out = np.empty(valid.shape, dtype=np.float64)
    n = valid.shape[0]
    step = max(1, min(n, (1 << 18) // max(1, valid[0].size)))

    def run(i0):
        sl = slice(i0, min(n, i0 + step))
        out[sl] = kernel(*(a[sl] for a in arrays), valid[sl])

    starts = range(0, n, step)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, starts))
    else:
        for i0 in starts:
            run(i0)
    return out


def mean_curvature(d: DerivativeBundle, valid: np.ndarray | None = None, workers: int = 1) -> ScalarGrid3:
    """Mean curvature ``H = div(grad phi / |grad phi|) / 2`` (1/mm); 0 where masked.

    With the inside-negative convention a sphere of radius r has H = 1/r.
    """
    if valid is None:
        valid = _valid_mask(d.gradnorm(), noise=d.noise)
    return ScalarGrid3.adopt(_pointwise(_mean_curvature, d, valid, workers), d.phi_x)


def gaussian_curvature(d: DerivativeBundle, valid: np.ndarray | None = None, workers: int = 1) -> ScalarGrid3:
    """Gaussian curvature from the bordered Hessian (1/mm^2); 0 where masked."""
    if valid is None:
        valid = _valid_mask(d.gradnorm(), noise=d.noise)
    return ScalarGrid3.adopt(_pointwise(_gaussian_curvature, d, valid, workers), d.phi_x)


def principal_curvatures(H, K):
    """Principal curvatures ``H +/- sqrt(H^2 - K)`` with ``kappa1 >= kappa2``.

    Discriminants at round-off level of ``max(H^2, |K|)``, and negative ones,
    are clamped to 0 so umbilic points get equal curvatures.
    """
    H = np.asarray(H, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    disc = H * H - K
    tiny = UMBILIC_TOL * np.maximum(np.maximum(H * H, np.abs(K)), 1e-30)
    s = np.sqrt(np.where(disc > tiny, disc, 0.0))
    k1, k2 = H + s, H - s
    if k1.ndim == 0:
        return float(k1), float(k2)
    return k1, k2


@dataclass(frozen=True, eq=False)
class CurvatureFields:
    H: ScalarGrid3
    K: ScalarGrid3
    gradnorm: ScalarGrid3
    valid: np.ndarray
    kappa1: ScalarGrid3 | None = None
    kappa2: ScalarGrid3 | None = None

    @property
    def masked_count(self) -> int:
        return int(self.valid.size - np.count_nonzero(self.valid))


def curvature_fields(
    e: Embedding | DerivativeBundle,
    principal: bool = False,
    workers: int = 1,
    floor: float = GRADIENT_FLOOR,
) -> CurvatureFields:
    """H, K and |grad phi| on the whole grid, optionally with principal curvatures."""
    d = e if isinstance(e, DerivativeBundle) else derivatives(e)
    gn = d.gradnorm()
    valid = _valid_mask(gn, floor, d.noise)
    valid.setflags(write=False)
    H = mean_curvature(d, valid, workers)
    K = gaussian_curvature(d, valid, workers)
    k1 = k2 = None
    if principal:
        a, b = principal_curvatures(H.values, K.values)
        k1, k2 = ScalarGrid3.adopt(a, H), ScalarGrid3.adopt(b, H)
    return CurvatureFields(H, K, ScalarGrid3.adopt(gn, H), valid, k1, k2)
