"""Decoders and threshold simulations for the cubic Chamon code."""

from chamon.lattice import ChamonLattice, build_lattice

__all__ = ["ChamonLattice", "build_lattice", "__version__"]

__version__ = "0.1.0"
