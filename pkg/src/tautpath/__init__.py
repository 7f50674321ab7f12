"""Terrain shortest paths from a stretched truss network."""

__version__ = "0.1.0"
