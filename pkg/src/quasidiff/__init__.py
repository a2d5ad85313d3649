"""quasidiff: cut-and-project model sets and their pure-point spherical diffraction."""

from ._backend import active_backend, set_backend
from .lattice import (
    DegenerateLatticeError,
    LatticeBasis,
    Region,
    UnboundedRegionError,
    covolume,
    dual_lattice,
    enumerate_points,
)
from .scheme import ModelSet, Scheme, Window, cut_and_project, density, flc_report
from .testfun import TestFunction

__all__ = [
    "LatticeBasis",
    "Region",
    "Window",
    "Scheme",
    "ModelSet",
    "TestFunction",
    "covolume",
    "dual_lattice",
    "enumerate_points",
    "cut_and_project",
    "density",
    "flc_report",
    "DegenerateLatticeError",
    "UnboundedRegionError",
    "active_backend",
    "set_backend",
]

__version__ = "0.1.0"
