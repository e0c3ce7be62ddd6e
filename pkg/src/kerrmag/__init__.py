"""Steady-state Gaussian entanglement and Kerr-induced nonreciprocity in a
two-cavity magnomechanical system."""

__version__ = "0.1.0"
