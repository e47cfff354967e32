"""Shifted dyadic grids, sparse and corona decompositions, fractional operators,
Orlicz norms and two-weight constants on piecewise-constant meshes."""

from .grid import DyadicCube, all_shifts, locate, one_third_cover
from .mesh import MeshFunction, WeightPair
from .orlicz import YoungFunction, luxemburg_norm
from .constants import ConstantReport

__version__ = "0.1.0"

__all__ = [
    "DyadicCube",
    "all_shifts",
    "locate",
    "one_third_cover",
    "MeshFunction",
    "WeightPair",
    "YoungFunction",
    "luxemburg_norm",
    "ConstantReport",
]
