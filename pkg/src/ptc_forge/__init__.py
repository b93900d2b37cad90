"""Multi-objective evolutionary topology search for photonic tensor cores."""

__version__ = "0.1.0"
