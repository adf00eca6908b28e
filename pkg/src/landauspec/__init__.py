"""Spectral analysis of the linearized flow around Landau solutions."""

__version__ = "0.1.0"
