"""
Riccati Module
The distinguished Riccati solution w_q and the extinction-time transforms
built on it (entrance law, Laplace transforms, means, resolvent).
"""

from . import solver, transforms

__all__ = ['solver', 'transforms']
