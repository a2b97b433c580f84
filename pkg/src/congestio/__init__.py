"""Numerical laboratory for the hard-congestion limit of a generalized
Aw-Rascle system on the real line."""

from .constitutive import Params
from .grid import GridField
from .solver import FluidState, Trajectory, make_initial, run, validate_initial

__version__ = "0.1.0"

__all__ = [
    "Params",
    "GridField",
    "FluidState",
    "Trajectory",
    "make_initial",
    "run",
    "validate_initial",
    "__version__",
]
