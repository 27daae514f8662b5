"""Randomized collision models and the periodic dynamics they produce."""

__version__ = "0.1.0"
