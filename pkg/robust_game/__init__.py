"""Robust adaptive control for two-player linear-quadratic differential games."""

__version__ = "1.0.0"
