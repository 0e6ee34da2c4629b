"""Fleming-Viot particle systems with empirical-measure drift.

Simulation of the kill-and-respawn particle dynamics, estimators for its
stationary and transient observables, and independent deterministic solvers
(1D Fokker-Planck evolution, nonlinear eigenproblem, transcendental root
scan, reflected comparison process) used to verify them.
"""

from . import bessel, cli, config, drift, estimators, fokker_planck, geometry, particle_system, rng

__all__ = [
    "bessel",
    "cli",
    "config",
    "drift",
    "estimators",
    "fokker_planck",
    "geometry",
    "particle_system",
    "rng",
]

__version__ = "0.1.0"
