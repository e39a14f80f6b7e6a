"""Morphometry of binary volumes through Gaussian-blur implicit surfaces."""

__version__ = "0.1.0"

from .diffgeo import curvature_fields, derivatives, principal_curvatures
from .embed import Embedding, EmbeddingMethod, gaussian_embed, rebinarize, sdt_embed
from .grid import BinaryGrid3, ScalarGrid3, Spacing3, flatten_binary, pad, synth_sphere, synth_torus
from .integrate import MorphReport, area, morphometry, params_for, simpson3, surface_integral, volume
from .mesh import TriMesh, euler_from_mesh, marching_cubes, mesh_area, mesh_volume
from .regularize import RegParams, dirac_eps, epsilon_from_thickness, heaviside_eps

__all__ = [
    "BinaryGrid3",
    "Embedding",
    "EmbeddingMethod",
    "MorphReport",
    "RegParams",
    "ScalarGrid3",
    "Spacing3",
    "TriMesh",
    "area",
    "curvature_fields",
    "derivatives",
    "dirac_eps",
    "epsilon_from_thickness",
    "euler_from_mesh",
    "flatten_binary",
    "gaussian_embed",
    "heaviside_eps",
    "marching_cubes",
    "mesh_area",
    "mesh_volume",
    "morphometry",
    "pad",
    "params_for",
    "principal_curvatures",
    "rebinarize",
    "sdt_embed",
    "simpson3",
    "surface_integral",
    "synth_sphere",
    "synth_torus",
    "volume",
]
