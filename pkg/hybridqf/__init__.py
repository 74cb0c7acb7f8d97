"""Quasi-free hybrid quantum-classical dynamics at the characteristic-function level."""

__version__ = "0.1.0"

__all__ = ["__version__"]
