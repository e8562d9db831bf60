"""Ergodic optimization laboratory for one-dimensional maps."""

__version__ = "0.1.0"
