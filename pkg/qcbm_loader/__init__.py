"""Grayscale image loading with quantum circuit Born machines."""

__version__ = "1.0.0"
