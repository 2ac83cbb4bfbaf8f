"""Finite-window computations on sumsets, densities and syndeticity."""

from .lattice import Convention, LatticeSet, Window, build_set, boolean_op, translate
from .morphology import block_fill, block_quotient, dilate_cube, erode_cube, sumset

__all__ = [
    "Convention", "LatticeSet", "Window", "build_set", "boolean_op", "translate",
    "block_fill", "block_quotient", "dilate_cube", "erode_cube", "sumset",
]
__version__ = "0.1.0"
