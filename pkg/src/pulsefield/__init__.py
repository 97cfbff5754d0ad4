"""Simulation and regularity analysis of random sums of pulses."""

__version__ = "0.1.0"
