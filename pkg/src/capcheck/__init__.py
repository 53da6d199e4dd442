"""Simulator and bounded checker for capability-based storage protocols."""

__version__ = "0.1.0"
