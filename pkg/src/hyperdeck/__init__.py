"""Exact tools for k-deck reconstruction of 0/1 hypermatrices and peak polynomials."""

__version__ = "0.1.0"
