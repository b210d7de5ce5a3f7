"""Computations with Lagrangian torus fibrations in Donagi-Markman normal form."""

__version__ = "0.1.0"
