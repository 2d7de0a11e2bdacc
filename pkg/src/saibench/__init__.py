"""Structural-interpretation benchmarking for scientific ML models."""

__version__ = "0.1.0"
