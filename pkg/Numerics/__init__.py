"""
Numerics Module
Shared numerical kernels: quadrature, ODE integration, root finding,
power-series exponentiation and splittable random streams.
"""

from . import ode, quadrature, roots, series, streams

__all__ = ['ode', 'quadrature', 'roots', 'series', 'streams']
