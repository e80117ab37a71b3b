"""Balancing energy of a renewable multi-country power system under transmission limits."""

__version__ = "0.1.0"
