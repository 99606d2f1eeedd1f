"""Numerical laboratory for near-flat one-phase Hele-Shaw flow."""

__version__ = "0.1.0"
