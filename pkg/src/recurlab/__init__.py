"""Quantitative recurrence for one map and for commuting pairs."""

__version__ = "0.1.0"
