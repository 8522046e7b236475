"""Numerical laboratory for stable group-invariant signal representations."""

__version__ = "0.1.0"
