"""Finite-volume numerics for the random Landau Hamiltonian."""
__version__ = "0.1.0"
