"""Floquet-dressed long-range XY spin chains in trapped-ion crystals."""

__version__ = "0.1.0"
