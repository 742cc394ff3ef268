"""Spectra of Schrodinger operators with arrays of identical radial wells."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConvergenceError, DomainError, OverlapError, SpectralBoundViolation
from .potentials import RadialPotential, flat_well, gaussian_well, parabolic_well, tabulated_well
from .geometry import CircleConfig, WellArray, bent_chain, circle_array, sphere_config, straight_chain
from .bs_solver import SpectralResult, discrete_spectrum, ground_state, threshold_reference
from .oracles import PointInteractionSystem, point_spectrum, radial_bound_states
from .floquet import BandStructure, band_structure, bracketing_bounds
from .optimize import SearchSpec, maximize_circle, maximize_loop, maximize_sphere

__all__ = [
    "BandStructure", "CircleConfig", "ConvergenceError", "DomainError", "OverlapError",
    "PointInteractionSystem", "RadialPotential", "SearchSpec", "SpectralBoundViolation",
    "SpectralResult", "WellArray", "band_structure", "bent_chain", "bracketing_bounds",
    "circle_array", "discrete_spectrum", "flat_well", "gaussian_well", "ground_state",
    "maximize_circle", "maximize_loop", "maximize_sphere", "parabolic_well", "point_spectrum",
    "radial_bound_states", "sphere_config", "straight_chain", "tabulated_well",
    "threshold_reference",
]
