"""
Output Module
Command reports, CSV tables and SVG plots.
"""

from . import plots, report, writers

__all__ = ['plots', 'report', 'writers']
