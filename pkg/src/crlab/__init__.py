"""Numerical CR geometry of real hypersurfaces in C^n."""

__version__ = "0.1.0"
