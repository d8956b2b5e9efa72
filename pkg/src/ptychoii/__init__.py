"""Simulation and reconstruction for ptychographic intensity interferometry."""

__version__ = "0.1.0"
