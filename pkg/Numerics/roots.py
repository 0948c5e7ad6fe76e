"""
Root Finding Module
Bracketed root finding (Brent) and bracket search for monotone functions.
"""

import sys
from pathlib import Path

import numpy as np
from scipy import optimize

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


class BracketError(ValueError):
    """The function has no sign change on the requested bracket."""


def find_root_bracketed(g, lo, hi, tol=config.TOL_PHI, maxiter=200, full_output=False):
    """
    Root of g on [lo, hi] by Brent's method.

    The iterate never leaves the bracket. Linear g is solved by the first
    secant step.

    Args:
        g (callable): Scalar function with g(lo), g(hi) of opposite signs
        lo (float): Left end of the bracket
        hi (float): Right end of the bracket
        tol (float): Absolute tolerance on the root
        maxiter (int): Iteration cap
        full_output (bool): Also return scipy's RootResults

    Returns:
        float: Root (and RootResults when full_output is True)

    Raises:
        BracketError: If g does not change sign on [lo, hi]
        RuntimeError: If Brent's method does not converge
    """
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0 or g_hi == 0.0:
        root = lo if g_lo == 0.0 else hi
        if full_output:
            return root, optimize.RootResults(root, 0, 2, 0)
        return root
    if np.sign(g_lo) == np.sign(g_hi):
        raise BracketError(
            f"No sign change on [{lo:.6g}, {hi:.6g}]: g(lo)={g_lo:.3e}, g(hi)={g_hi:.3e}"
        )

    root, info = optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                                 maxiter=maxiter, full_output=True, disp=False)
    if not info.converged:
        raise RuntimeError(f"Root finding did not converge: {info.flag}")
    if full_output:
        return root, info
    return root


def expand_bracket(g, start, step, limit=200, lower_bound=-np.inf, upper_bound=np.inf):
    """
    Walk away from `start` until g changes sign.

    Args:
        g (callable): Monotone scalar function
        start (float): Starting abscissa
        step (float): Initial step, its sign gives the search direction; doubles each move
        limit (int): Maximum number of moves
        lower_bound, upper_bound (float): Hard limits of the search

    Returns:
        tuple: (lo, hi) with a sign change of g

    Raises:
        BracketError: If no sign change is found
    """
    x_prev, g_prev = start, g(start)
    if g_prev == 0.0:
        return start, start
    for _ in range(limit):
        x = float(np.clip(x_prev + step, lower_bound, upper_bound))
        g_x = g(x)
        if np.sign(g_x) != np.sign(g_prev):
            return (x_prev, x) if x_prev < x else (x, x_prev)
        if x == x_prev:
            break
        x_prev, g_prev = x, g_x
        step *= 2.0
    raise BracketError(f"No sign change found walking from {start:.6g}")
