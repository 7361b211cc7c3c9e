"""Distal limit-periodic potentials on Z^d, their hulls, and finite-volume localization checks."""

__version__ = "0.1.0"
