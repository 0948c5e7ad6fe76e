"""
Power Series Module
Coefficients of exp(g) for a polynomial g with g(0) = 0.
"""

import numpy as np


def power_series_exp(g_coeffs, n_terms):
    """
    Taylor coefficients a_0 .. a_{N-1} of exp(g(s)).

    Uses n * a_n = sum_{k=1}^{n} k * g_k * a_{n-k}, a_0 = 1, obtained by
    differentiating exp(g) once.

    Args:
        g_coeffs (array-like): g_0, g_1, ..., g_K with g_0 == 0
        n_terms (int): Number of coefficients N

    Returns:
        np.ndarray: a_0 .. a_{N-1}

    Raises:
        ValueError: If g(0) != 0 (factor the constant outside) or N < 1
    """
    g = np.asarray(g_coeffs, dtype=float)
    if g.size == 0 or g[0] != 0.0:
        raise ValueError("power_series_exp needs g(0) = 0; factor exp(g(0)) outside the series")
    if n_terms < 1:
        raise ValueError(f"n_terms must be at least 1, got {n_terms}")

    weighted = np.arange(g.size) * g
    a = np.zeros(int(n_terms))
    a[0] = 1.0
    for n in range(1, int(n_terms)):
        k_max = min(n, g.size - 1)
        if k_max == 0:
            continue
        # a[n-1], a[n-2], ..., a[n-k_max] against k g_k for k = 1..k_max
        a[n] = np.dot(weighted[1:k_max + 1], a[n - 1::-1][:k_max]) / n
    return a
