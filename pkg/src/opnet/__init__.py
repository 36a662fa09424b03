"""Learned parameter-to-weights mapping for parameterized image operators."""

__version__ = "0.1.0"
