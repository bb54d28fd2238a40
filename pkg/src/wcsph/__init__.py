"""Weakly-compressible SPH solver with cell-list and Verlet neighbor search."""

from .core import (DensityMode, FluidProperties, Integrator, InvalidParticleError, Kind,
                   NeighborMode, PairMode, ParticleSystem, SimulationConfig, ViscosityModel,
                   new_particle_system, total_mass, total_momentum)
from .kernels import CubicSplineKernel, smoothing_length_from_count
from .parallel import ExecPolicy

__version__ = "0.1.0"

__all__ = [
    "DensityMode", "FluidProperties", "Integrator", "InvalidParticleError", "Kind",
    "NeighborMode", "PairMode", "ParticleSystem", "SimulationConfig", "ViscosityModel",
    "new_particle_system", "total_mass", "total_momentum",
    "CubicSplineKernel", "smoothing_length_from_count", "ExecPolicy",
]
