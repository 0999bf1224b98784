"""Simulation and verification toolkit for lattice Gibbs measures with polynomial interactions."""

__version__ = "0.1.0"
