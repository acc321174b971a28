"""Numerical laboratory for the focusing inhomogeneous generalized Hartree equation."""

__version__ = "0.1.0"
