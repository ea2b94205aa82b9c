"""Adiabatic population transfer among degenerate level manifolds."""

__version__ = "0.1.0"
