"""Deformed determinantal point processes: kernels, Fredholm determinants and limit experiments."""

__version__ = "0.1.0"
