"""Numerical tools for the Reinhardt optimal control problem on SL2(R)."""

__version__ = "0.1.0"
