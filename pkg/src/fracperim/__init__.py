"""Anisotropic nonlocal fractional perimeters and their s -> 1 limits."""

__version__ = "0.1.0"
