"""Stochastic reaction-diffusion lattice systems: simulation, action
minimization, invariant-measure sampling, and quantitative bound checks."""

from .lattice import LatticeShape, StateVector

__version__ = "0.1.0"

__all__ = ["LatticeShape", "StateVector", "__version__"]
