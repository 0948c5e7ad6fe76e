"""
Validation Module
Acceptance suites: Monte Carlo output held against the closed forms.
"""

from . import suites

__all__ = ['suites']
