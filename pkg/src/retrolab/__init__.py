"""Relativistic two-state guidance laboratory in 1+1 dimensions."""

__version__ = "0.1.0"
