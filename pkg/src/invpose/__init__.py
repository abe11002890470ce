"""Monocular pose estimation of a known mesh with an illumination-invariant loss."""

__version__ = "0.1.0"
