"""
Adaptive Quadrature Module
Wraps QUADPACK (scipy.integrate.quad) with an explicit result contract,
endpoint-singularity substitutions and geometric panels for long ranges.
"""

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


class QuadratureError(RuntimeError):
    """Raised when an integral does not converge within the evaluation budget."""

    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class QuadResult:
    """
    Value of a definite integral with its error estimate.

    `converged` is False only when the caller asked not to raise on failure;
    otherwise error_estimate <= tol * max(1, |value|).
    """
    value: float
    error_estimate: float
    evaluations: int
    converged: bool = True

    def __add__(self, other):
        return QuadResult(
            self.value + other.value,
            self.error_estimate + other.error_estimate,
            self.evaluations + other.evaluations,
            self.converged and other.converged,
        )


def _power_substitution(f, endpoint, exponent, direction):
    """
    Integrand after x = endpoint + direction * t**k with k = 1 / (1 + exponent).

    An envelope |x - endpoint|**exponent becomes t**0, so QUADPACK sees a
    smooth integrand in t.
    """
    k = 1.0 / (1.0 + exponent)

    def g(t):
        if t <= 0.0:
            return 0.0
        return f(endpoint + direction * t**k) * k * t ** (k - 1.0)

    return g, k


def _quad(g, a, b, tol, limit):
    value, error, info, *rest = integrate.quad(
        g, a, b, epsabs=tol, epsrel=tol, limit=limit, full_output=1
    )
    ier_message = rest[0] if rest else ""
    converged = (not ier_message) or error <= tol * max(1.0, abs(value))
    return QuadResult(float(value), float(error), int(info['neval']), converged), ier_message


def adaptive_quad(f, a, b, tol=config.TOL, singularity_hints=None,
                  limit=config.QUAD_LIMIT, raise_on_failure=True):
    """
    Integrate f over [a, b] adaptively.

    Args:
        f (callable): Scalar integrand, finite on the open interval
        a (float): Lower limit (may be -inf)
        b (float): Upper limit (may be +inf)
        tol (float): Absolute tolerance, relative for integrals larger than 1
        singularity_hints (dict): Optional {'a': p, 'b': p} with p > -1, the
            exponent of an integrable power envelope |x - endpoint|**p
        limit (int): QUADPACK subinterval budget
        raise_on_failure (bool): Raise QuadratureError instead of flagging

    Returns:
        QuadResult: value, error estimate, evaluation count

    Raises:
        ValueError: If the limits are reversed or a hint is not integrable
        QuadratureError: If the integral fails to converge
    """
    if a > b:
        raise ValueError(f"Integration limits must be increasing, got [{a}, {b}]")
    if a == b:
        return QuadResult(0.0, 0.0, 0)

    hints = dict(singularity_hints or {})
    for side, exponent in hints.items():
        if side not in ('a', 'b'):
            raise ValueError(f"Singularity hint must name endpoint 'a' or 'b', got '{side}'")
        if exponent <= -1.0:
            raise ValueError(f"Envelope exponent {exponent} at '{side}' is not integrable")
    hints = {side: p for side, p in hints.items() if p < 0.0}

    pieces = []
    if not hints:
        pieces.append(_quad(f, a, b, tol, limit))
    else:
        # Each hinted endpoint gets its own piece so the substitution sees one singularity
        if np.isinf(a) or np.isinf(b):
            finite_end = a if 'a' in hints else b
            split = finite_end + (1.0 if 'a' in hints else -1.0)
        else:
            split = 0.5 * (a + b)
        lo_end, hi_end = (a, split), (split, b)

        if 'a' in hints:
            g, k = _power_substitution(f, a, hints['a'], +1.0)
            pieces.append(_quad(g, 0.0, (lo_end[1] - a) ** (1.0 / k), tol / 2, limit))
        else:
            pieces.append(_quad(f, *lo_end, tol / 2, limit))

        if 'b' in hints:
            g, k = _power_substitution(f, b, hints['b'], -1.0)
            pieces.append(_quad(g, 0.0, (b - hi_end[0]) ** (1.0 / k), tol / 2, limit))
        else:
            pieces.append(_quad(f, *hi_end, tol / 2, limit))

    result = pieces[0][0]
    messages = [pieces[0][1]]
    for piece, message in pieces[1:]:
        result = result + piece
        messages.append(message)

    if not result.converged and raise_on_failure:
        detail = "; ".join(m for m in messages if m)
        raise QuadratureError(f"Quadrature on [{a}, {b}] did not converge: {detail}",
                              result.error_estimate)
    return result


def quad_geometric(f, a, b, tol=config.TOL, first_width=1.0, singularity_hints=None):
    """
    Integrate over a long interval [a, b] split into doubling pieces.

    Used for truncated tails where one QUADPACK call over [a, b] would
    under-resolve the region near a.

    Returns:
        QuadResult: Sum over pieces
    """
    edges = [a]
    width = first_width
    while edges[-1] + width < b:
        edges.append(edges[-1] + width)
        width *= 2.0
    edges.append(b)

    n_pieces = len(edges) - 1
    result = QuadResult(0.0, 0.0, 0)
    for i in range(n_pieces):
        hints = singularity_hints if i == 0 else None
        result = result + adaptive_quad(f, edges[i], edges[i + 1], tol / n_pieces,
                                        singularity_hints=hints)
    return result
