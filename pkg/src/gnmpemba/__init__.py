"""Dissipative lattice Gross-Neveu dynamics in the self-consistent mean-field Lindblad picture."""

from .model import (
    ModelParams,
    OrderParameterProfile,
    SpectralDecomposition,
    build_hamiltonian,
    decompose_order_parameter,
    diagonalize,
    fermi,
    self_consistent_sigma,
)
from .initstate import RandomInitSpec, random_half_filled_theta, solve_steady_state, thermal_theta_at_fixed_h
from .evolution import EvolutionConfig, Observers, TrajectoryRecord, evolve, rhs, step

__version__ = "0.1.0"
