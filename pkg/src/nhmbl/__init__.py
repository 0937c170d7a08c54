"""Singular-value diagnostics of chaos and localization in disordered
non-Hermitian spin chains."""

__version__ = "0.1.0"
