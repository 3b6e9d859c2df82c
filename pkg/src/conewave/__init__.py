"""Verification toolkit for a mixed Dirichlet-Neumann nonlinear wave problem."""

__version__ = "0.1.0"
