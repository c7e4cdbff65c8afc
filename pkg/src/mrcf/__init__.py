"""Spectral simulation of mean radius of curvature flow on line space.

Submodules: :mod:`~mrcf.sphere_harmonics` (grids, transforms, spin
operators), :mod:`~mrcf.line_space` (oriented lines, sections, surfaces),
:mod:`~mrcf.flow_engine` (exact evolution, residuals, reports),
:mod:`~mrcf.oracle` (independent checks) and :mod:`~mrcf.cli_io`.
"""

from .flow_engine import (
    FlowReport,
    FlowState,
    convergence_report,
    evolve_support,
    extract_center,
    pde_residual,
)
from .line_space import CenterPoint, OrientedLine, SectionField, SupportField
from .sphere_harmonics import HarmonicSpectrum, SphereGrid, make_grid, sht_forward, sht_inverse

__version__ = "0.1.0"

__all__ = [
    "CenterPoint",
    "FlowReport",
    "FlowState",
    "HarmonicSpectrum",
    "OrientedLine",
    "SectionField",
    "SphereGrid",
    "SupportField",
    "convergence_report",
    "evolve_support",
    "extract_center",
    "make_grid",
    "pde_residual",
    "sht_forward",
    "sht_inverse",
]
