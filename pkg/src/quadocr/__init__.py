"""Handwritten character recognition with quad-tree shadow and longest-run features."""

__version__ = "0.1.0"
