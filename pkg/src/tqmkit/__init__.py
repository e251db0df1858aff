"""Numerical toolkit for quantum mechanics with coordinate time as an operator."""

__version__ = "0.1.0"
