"""Desk-scale numerical toolkit for quasi-local mass inequalities on initial data sets.

Subpackages cover chart-level tensor calculus, constraint densities, surface
extrinsic geometry and trapped-surface classification, the graph deformation
(Jang) boundary-value problem, quasi-local mass functionals, and spinor /
Dirac-spectrum verification of the associated eigenvalue bounds.
"""

from .chart import ChartDomain
from .errors import GeotoolError
from .fields import FDOptions, MetricField, ScalarField, SymTensorField, VectorField
from .initial_data import InitialDataSet, dominant_energy_report, energy_density, momentum_density
from .jang import JangOptions, JangSolution, solve_jang
from .masses import MassReport, brown_york, hmr_mass, lam_mass, liu_yau_checks, mass_report
from .spin import CliffordRep, RevolutionDiracProblem, SpinorField, clifford_identities
from .surface import (EuclideanImmersion, NullExpansionField, SurfaceEmbedding,
                      SurfaceGeometry, classify, dichotomy_check, null_expansions)

__version__ = "0.1.0"

__all__ = [
    "ChartDomain",
    "CliffordRep",
    "EuclideanImmersion",
    "FDOptions",
    "GeotoolError",
    "InitialDataSet",
    "JangOptions",
    "JangSolution",
    "MassReport",
    "MetricField",
    "NullExpansionField",
    "RevolutionDiracProblem",
    "ScalarField",
    "SpinorField",
    "SurfaceEmbedding",
    "SurfaceGeometry",
    "SymTensorField",
    "VectorField",
    "brown_york",
    "classify",
    "clifford_identities",
    "dichotomy_check",
    "dominant_energy_report",
    "energy_density",
    "hmr_mass",
    "lam_mass",
    "liu_yau_checks",
    "mass_report",
    "momentum_density",
    "null_expansions",
    "solve_jang",
]
