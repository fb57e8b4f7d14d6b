"""Numerical laboratory for Osgood flows, singular transport and 2D Euler."""

__version__ = "0.1.0"
