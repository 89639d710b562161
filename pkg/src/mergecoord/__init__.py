"""Passing-order coordination for connected automated vehicles at an on-ramp merge."""

__version__ = "0.1.0"
