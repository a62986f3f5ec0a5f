"""Numerical laboratory for the Euler-Poisson system in weighted Sobolev spaces."""

__version__ = "0.1.0"
