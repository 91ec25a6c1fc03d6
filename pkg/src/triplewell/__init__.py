"""Semiclassical analysis of the three-mode Bose-Hubbard model."""
__version__ = "0.1.0"
