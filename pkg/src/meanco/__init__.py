"""Finite elements, closed-form oracles and parameter tuning for ∫|∇u|² + f det∇u."""

__version__ = "0.1.0"
