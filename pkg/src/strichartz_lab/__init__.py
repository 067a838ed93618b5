"""Numerical laboratory for Strichartz-type estimates of the planar Schrodinger group."""

__version__ = "0.1.0"
