"""
Mechanism Module
Branching mechanisms in both settings and the deterministic functionals
derived from them (m, theta, xi, phi, r, nu, mu).
"""

from . import functionals, mechanisms, stationary

__all__ = ['functionals', 'mechanisms', 'stationary']
