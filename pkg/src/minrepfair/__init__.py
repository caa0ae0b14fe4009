"""Minimum-representation fair k-means clustering (MiniReL)."""

__version__ = "0.1.0"
