"""Numerical toolkit for Bank-Laine functions and the equation y'' + A(z) y = 0."""

__version__ = "0.1.0"
