"""Conic bundle surfaces over Q: invariants, local densities, point counts
and del Pezzo Galois-action classification."""

__version__ = "0.1.0"
