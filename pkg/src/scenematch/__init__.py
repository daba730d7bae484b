"""Evidential matching of line-segment scenes, self-location and hallway navigation."""

__version__ = "0.1.0"
