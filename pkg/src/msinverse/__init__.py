"""Inverse design of ring-tile metasurface unit cells."""

__version__ = "0.1.0"
