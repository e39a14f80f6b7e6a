"""Finite-support sine Heaviside/Dirac approximations and epsilon selection.

For a Gaussian-blur embedding the field is unitless, so a physical shell
thickness ``t`` (mm) is mapped to ``epsilon`` through the error function of
the blurred edge profile.  For a distance embedding epsilon is itself a
length and is simply half the thickness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

__all__ = [
    "Regime",
    "RegParams",
    "heaviside_eps",
    "dirac_eps",
    "epsilon_from_thickness",
    "epsilon_linearized",
    "epsilon_for_sdt",
]

DEFAULT_THRESHOLD = 0.5
DEFAULT_SIGMA_MM = 2.0
DEFAULT_THICKNESS_MM = 2.5


class Regime(str, Enum):
    """Units of epsilon: field units for blurred embeddings, mm for distances."""

    UNITLESS = "unitless"
    MM = "mm"


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps}")


def heaviside_eps(x, eps: float):
    """Sine-regularized Heaviside, exactly 0 below ``-eps`` and 1 above ``eps``."""
    _check_eps(eps)
    x = np.asarray(x, dtype=np.float64)
    inner = 0.5 * (1.0 + x / eps + np.sin(np.pi * x / eps) / np.pi)
    out = np.where(x > eps, 1.0, np.where(x < -eps, 0.0, inner))
    return out if out.ndim else float(out)


def dirac_eps(x, eps: float):
    """Raised-cosine Dirac delta supported on ``[-eps, eps]``."""
    _check_eps(eps)
    x = np.asarray(x, dtype=np.float64)
    inner = (1.0 + np.cos(np.pi * x / eps)) / (2.0 * eps)
    out = np.where(np.abs(x) <= eps, inner, 0.0)
    return out if out.ndim else float(out)


def _check_positive(**kw) -> None:
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def epsilon_from_thickness(t_mm: float, sigma_mm: float) -> float:
    """Epsilon (field units) whose Dirac support spans ``t_mm`` across a blurred edge.

    Independent of the threshold T because the edge profile is only shifted
    by T.
    """
    _check_positive(t_mm=t_mm, sigma_mm=sigma_mm)
    return 0.5 * float(erf(t_mm / (2.0 * math.sqrt(2.0) * sigma_mm)))


def epsilon_linearized(t_mm: float, sigma_mm: float) -> float:
    """First-order approximation of :func:`epsilon_from_thickness` for ``t << sigma``.

    Uses the slope of the edge profile at the zero crossing,
    ``1 / (sqrt(2 pi) sigma)``.
    """
    if t_mm < 0 or not sigma_mm > 0:
        raise ValueError("need t >= 0 and sigma > 0")
    return t_mm / (2.0 * sigma_mm * math.sqrt(2.0 * math.pi))


def epsilon_for_sdt(t_mm: float) -> float:
    """Half-thickness epsilon (mm) for a signed distance embedding."""
    _check_positive(t_mm=t_mm)
    return 0.5 * t_mm


@dataclass(frozen=True)
class RegParams:
    """Regularization bundle for integrals over one embedding.

    ``epsilon`` is in field units when ``regime`` is UNITLESS (Gaussian
    embeddings) and in mm when it is MM (distance embeddings).
    """

    t: float
    epsilon: float
    regime: Regime
    sigma: float | None = None
    T: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        _check_positive(t=self.t, epsilon=self.epsilon)
        if not 0 < self.T < 1:
            raise ValueError(f"threshold T must lie in (0, 1), got {self.T}")
        if self.regime is Regime.UNITLESS:
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("unitless regime needs a positive sigma")
            if self.epsilon > 0.5:
                raise ValueError("epsilon cannot exceed 0.5 for a Gaussian embedding")

    @classmethod
    def gaussian(cls, t_mm: float, sigma_mm: float, T: float = DEFAULT_THRESHOLD) -> "RegParams":
        return cls(t_mm, epsilon_from_thickness(t_mm, sigma_mm), Regime.UNITLESS, sigma_mm, T)

    @classmethod
    def sdt(cls, t_mm: float) -> "RegParams":
        return cls(t_mm, epsilon_for_sdt(t_mm), Regime.MM)
