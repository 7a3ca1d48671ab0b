"""Numerical toolkit for lambda-sequence operator-space tensor products on matrix algebras."""

__version__ = "0.1.0"
