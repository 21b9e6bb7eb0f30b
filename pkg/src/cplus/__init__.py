"""Certified lower bounds for C+(A) via Gaussian-times-polynomial SOS programs."""

__version__ = "0.1.0"
