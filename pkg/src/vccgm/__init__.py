"""Adaptive-vicinity continuous conditional GANs at desk scale."""

__version__ = "0.1.0"
