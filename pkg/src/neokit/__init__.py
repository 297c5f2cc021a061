"""Spectral subspace tools for point clouds and meshes."""

__version__ = "0.1.0"
