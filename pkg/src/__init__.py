"""Reduced rectangular Morley elements for eps^2 bilaplacian minus Laplacian problems."""

__version__ = "0.1.0"
