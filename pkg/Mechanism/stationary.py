"""
Stationary Law Module
The law nu with transform exp(m) and the stationary law mu of the
recurrent regimes (discrete d = 0, continuous subordinators).
"""

import sys
from pathlib import Path

import numpy as np
from scipy import special, stats

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.functionals import ContinuousFunctionals, DiscreteFunctionals
from Mechanism.mechanisms import DiscreteMechanism, RegimeError, condition_partial, psi
from Numerics.quadrature import adaptive_quad, quad_geometric
from Numerics.series import power_series_exp


def _require_no_deaths(mech):
    if mech.d != 0.0:
        raise RegimeError(
            f"The discrete stationary law needs d = 0 (positive recurrence), got d = {mech.d}"
        )


def nu_discrete(mech, n_terms):
    """
    Coefficients nu_1..nu_N of exp(m(s)) = sum_i nu_i s^(i-1).

    Args:
        mech (DiscreteMechanism): Mechanism with d = 0
        n_terms (int): Number of coefficients N

    Returns:
        np.ndarray: nu_1..nu_N

    Raises:
        RegimeError: If d != 0
    """
    _require_no_deaths(mech)
    funcs = DiscreteFunctionals(mech)
    coeffs = power_series_exp(funcs.exponent_coeffs, n_terms)
    return np.exp(funcs.log_beta) * coeffs


def mu_discrete(mech, n_terms, tol=config.TOL):
    """
    Stationary law mu_i proportional to nu_i / i, truncated at N.

    The normalizer sum_j nu_j / j equals xi = int_0^1 exp(m); the truncation
    is accepted only if the dropped mass xi - sum_{j <= N} nu_j / j is below tol.

    Args:
        mech (DiscreteMechanism): Mechanism with d = 0
        n_terms (int): Truncation N
        tol (float): Budget for the dropped tail

    Returns:
        np.ndarray: mu_1..mu_N

    Raises:
        RegimeError: If d != 0
        ValueError: If N is too small for tol
    """
    nu = nu_discrete(mech, n_terms)
    weights = nu / np.arange(1, n_terms + 1)
    partial = float(np.sum(weights))
    dropped = DiscreteFunctionals(mech, tol=tol).xi() - partial
    if dropped > tol:
        raise ValueError(
            f"N = {n_terms} leaves stationary mass {dropped:.3e} > tol = {tol:.1e}; increase N"
        )
    return weights / partial


def mu_binary(rho, c, i):
    """
    Closed-form stationary law of binary splitting without deaths:
    Poisson(rho/c) conditioned to be positive.
    """
    mean = rho / c
    return stats.poisson.pmf(i, mean) / -np.expm1(-mean)


def nu_laplace(mech, lam, c):
    """
    Laplace transform exp(m(lambda)) of nu for a subordinator mechanism.

    Raises:
        RegimeError: If mech is not a subordinator
    """
    if not mech.is_subordinator:
        raise RegimeError("nu exists only for subordinator mechanisms (recurrent regime)")
    return ContinuousFunctionals(mech, c).exp_m(lam)


def _tail_start(mech):
    # Beyond this point every atom has lambda * r >= 1, where exp1 is well conditioned
    return max([1.0] + [1.0 / r for r, _ in mech.atoms])


def _exp_m_tail(mech, c, start, tol):
    """
    int_start^inf exp(m) in the variable u = log(lambda).

    For a subordinator m has the closed form
    -delta*l/c - sum (rate/c) (log(l r) + euler_gamma + E1(l r)) - (a/c) log(1 + l/kappa),
    with a the exponential jump rate. So exp(m) = A l^{-rho/c} exp(corr) with
    corr vanishing as l grows. With delta = 0 the power part integrates
    exactly and only exp(corr) - 1 is left to quadrature.
    """
    p = mech.rho / c
    delta = mech.delta if mech.delta > config.SUBORDINATOR_DRIFT_TOL else 0.0
    log_amplitude = -sum(rate * (np.log(r) + np.euler_gamma) for r, rate in mech.atoms) / c
    log_amplitude += mech.exp_rate * np.log(mech.kappa) / c
    u0 = float(np.log(start))
    if delta == 0.0 and p <= 1.0:
        raise RegimeError(f"Drift {mech.delta:.1e} is below resolution and rho/c = {p} <= 1")

    def corr(u):
        # exp1 and the drift term are zero to double precision long before the cap
        lam = np.exp(min(u, 700.0))
        value = -delta * lam / c
        value -= sum(rate * special.exp1(r * lam) for r, rate in mech.atoms) / c
        if mech.exp_rate > 0:
            value -= mech.exp_rate * np.log1p(mech.kappa * np.exp(-u)) / c
        return float(value)

    if delta > 0.0:
        return adaptive_quad(lambda u: np.exp(log_amplitude + (1.0 - p) * u + corr(u)),
                             u0, np.inf, tol=tol).value

    leading = np.exp(log_amplitude - (p - 1.0) * u0) / (p - 1.0)
    correction = adaptive_quad(
        lambda u: np.exp(log_amplitude + (1.0 - p) * u) * np.expm1(corr(u)),
        u0, np.inf, tol=tol,
    ).value
    return float(leading + correction)


def _total_exp_m(mech, c, tol):
    if not mech.is_subordinator:
        raise RegimeError("The stationary law exists only for subordinator mechanisms")
    if not condition_partial(mech, c):
        raise RegimeError(
            "int_0^inf exp(m) diverges: delta = 0 and rho <= c (null-recurrent regime)"
        )
    funcs = ContinuousFunctionals(mech, c, tol=tol)
    start = _tail_start(mech)
    head = quad_geometric(funcs.exp_m, 0.0, start, tol=tol / 2).value
    return funcs, head + _exp_m_tail(mech, c, start, tol / 2)


def stationary_mean(mech, c, tol=config.TOL):
    """
    Mean of the stationary law mu: 1 / int_0^inf exp(m).

    Args:
        mech (LevyMechanism): Subordinator mechanism
        c (float): Competition rate
        tol (float): Quadrature tolerance (also the tail budget)

    Returns:
        float: Stationary mean

    Raises:
        RegimeError: If mech is not a subordinator or the integral diverges
    """
    _, total = _total_exp_m(mech, c, tol)
    return 1.0 / total


def stationary_laplace(mech, lam, c, tol=config.TOL):
    """
    Laplace transform of mu at lambda: int_lambda^inf exp(m) / int_0^inf exp(m).
    """
    funcs, total = _total_exp_m(mech, c, tol)
    head = funcs.theta(lam)
    return max(total - head, 0.0) / total


def stationarity_residual(mech, grid, c=None, step=1e-5):
    """
    Largest relative residual of the first-order equation satisfied by exp(m).

    Continuous: psi(l) chi(l) - c l chi'(l) = 0 with chi = exp(m).
    Discrete: psi(s) G(s) + c s (1 - s) G'(s) = 0 with G = exp(m).
    chi' is a central difference, so the residual is of order step^2.

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism
        grid (array-like): Evaluation points (inside (0, 1) for discrete)
        c (float): Competition rate for continuous mechanisms
        step (float): Relative finite-difference step

    Returns:
        float: max |residual| / (|psi chi| + |c x chi'| + tiny)
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(mech, DiscreteMechanism):
        funcs = DiscreteFunctionals(mech)
        c = mech.c
        factor = lambda x: c * x * (1.0 - x)
        sign = 1.0
    else:
        funcs = ContinuousFunctionals(mech, c)
        factor = lambda x: c * x
        sign = -1.0

    worst = 0.0
    for x in grid:
        h = step * max(x, 1e-3)
        derivative = (funcs.exp_m(x + h) - funcs.exp_m(x - h)) / (2.0 * h)
        value = funcs.exp_m(x)
        lhs = psi(mech, x) * value
        rhs = sign * factor(x) * derivative
        worst = max(worst, abs(lhs + rhs) / (abs(lhs) + abs(rhs) + 1e-300))
    return worst
