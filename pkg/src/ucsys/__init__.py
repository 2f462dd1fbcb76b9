"""Numerical toolkit for pencil factorisation and Carleman estimates of elliptic systems."""

__version__ = "0.1.0"
