"""Steady incompressible Euler flows with stagnation regions in 2-D nozzles.

Stream-function formulation: a 1-D shear-flow toolkit (profile1d), nozzle
geometry and boundary-fitted grids (geometry), a box-constrained energy
minimizer for the stream function (minimizer), free-boundary extraction
(freeboundary), and physical-field diagnostics (diagnostics), orchestrated
by a small CLI (cli).
"""

from .profile1d import (
    FlowConstants,
    ShearProfile,
    DomainError,
    kappa,
    f_of_psi,
    bigF,
    c_of_d,
    build_shear_profile,
    cauchy_solve,
    energy_1d,
    intersection_count,
)

__all__ = [
    "FlowConstants",
    "ShearProfile",
    "DomainError",
    "kappa",
    "f_of_psi",
    "bigF",
    "c_of_d",
    "build_shear_profile",
    "cauchy_solve",
    "energy_1d",
    "intersection_count",
]

__version__ = "0.1.0"
