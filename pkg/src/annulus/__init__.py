"""Finite-type minimal annuli in S^2 x R from spectral data."""

__version__ = "0.1.0"
