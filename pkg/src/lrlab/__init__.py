"""Exact computations with Jacobi algebras, Lie-Rinehart pairs and their antipodes."""

__version__ = "0.1.0"
