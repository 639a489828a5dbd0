"""Guaranteed lower eigenvalue bounds from dual mixed finite elements."""

__version__ = "0.1.0"
