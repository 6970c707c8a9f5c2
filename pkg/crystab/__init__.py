"""Stability analysis and boundary feedback design for crystallizer models."""

__version__ = "0.1.0"
