"""Landscape-space reverse engineering of black-box optimization benchmarks."""

__version__ = "0.1.0"
