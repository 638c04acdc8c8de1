"""Adaptive estimation of a quadratic functional in the Gaussian sequence model."""

__version__ = "0.1.0"
