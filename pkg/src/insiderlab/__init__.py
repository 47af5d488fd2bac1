"""Numerical laboratory for continuous-time insider trading equilibria."""

__version__ = "0.1.0"
