"""Finite-resolution constructions and checks for quasisymmetrically minimal carpets."""

from .carpet import CarpetParams, eval_f, eval_h, glued_f
from .grid import ConfigError, GridParams, locate_point, stopping_state
from .stochastic import WalkSpec, exit_bound
from .weights import WeightHierarchy

__version__ = "0.1.0"

__all__ = [
    "CarpetParams",
    "ConfigError",
    "GridParams",
    "WalkSpec",
    "WeightHierarchy",
    "eval_f",
    "eval_h",
    "exit_bound",
    "glued_f",
    "locate_point",
    "stopping_state",
]
