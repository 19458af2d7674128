"""Tropical degenerations of hypersurfaces in a complex torus and their
approximate Kahler metrics."""

__version__ = "0.1.0"
