"""Exact constructions and certificates for balanced fans with non-convex complements."""

__version__ = "0.1.0"
