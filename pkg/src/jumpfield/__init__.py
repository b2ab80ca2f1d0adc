"""Simulation and spectral-verification lab for independent jump dynamics.

Particles in R^d jump independently with rate density a(x - y).  The package
simulates the infinite system in finite windows, evaluates the one-particle
semigroup exactly on periodic grids, and verifies large-time asymptotics,
hydrodynamic scaling limits, and cluster-expansion predictions at desk scale.
"""

__version__ = "0.1.0"
