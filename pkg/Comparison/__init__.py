"""
Comparison Module
Statistics that hold Monte Carlo output against closed-form values.
"""

from . import mc_statistics

__all__ = ['mc_statistics']
