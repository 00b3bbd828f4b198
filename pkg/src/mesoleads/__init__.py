"""Driven open fermionic systems with mesoscopic leads.

Continuum baths are replaced by finite sets of damped lead modes; the extended
system is Gaussian, so its correlation matrix obeys a closed Lyapunov flow.
"""

__version__ = "0.1.0"

from .spectral import BathSpec, DiscretizationScheme, SpectralFunction, build_grid, build_lead
from .model import DriveProtocol, Harmonic, SystemModel, assemble_generator, initial_state, resonant_level, two_dot
from .lyapunov import IntegrationError, SolverError, evolve, steady_state
from .floquet import ConvergenceError, FloquetSolution, solve_limit_cycle
from .thermo import ThermoAccumulator, cycle_averages, instantaneous, rectification

__all__ = [
    "BathSpec", "DiscretizationScheme", "SpectralFunction", "build_grid", "build_lead",
    "DriveProtocol", "Harmonic", "SystemModel", "assemble_generator", "initial_state",
    "resonant_level", "two_dot", "IntegrationError", "SolverError", "evolve", "steady_state",
    "ConvergenceError", "FloquetSolution", "solve_limit_cycle", "ThermoAccumulator",
    "cycle_averages", "instantaneous", "rectification",
]
