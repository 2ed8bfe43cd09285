"""Toolkit for synthesizing and collecting captioned shopper trajectories on 2D store maps."""

__version__ = "0.1.0"
