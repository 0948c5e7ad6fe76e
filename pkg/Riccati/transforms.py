"""
Extinction-Time Transforms Module
Entrance law from infinity, Laplace transforms and means of the absorption
time T_a, and the resolvent, all built on w_q and its integral W.

Double integrals of the form
    int dt e^{2W(t)} int_t^xi ds q r^2(s) k(s) e^{-W(s)}
are evaluated in the log coordinate z after swapping the order of
integration. The inner factor becomes V(u) = e^{-m(u)} int_{-inf}^u e^{2W} d theta,
which solves V' = e^{2W} e^{log_jacobian} - (dm/dz) V and stays O(1) where
theta itself overflows. Past the point where dm/dz gets large the sweep
hands over to quadrature.
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.functionals import functionals_for
from Mechanism.mechanisms import (AbsorptionRegime, DiscreteMechanism, RegimeError,
                                  absorption_regime, psi)
from Numerics.ode import ode_solve
from Numerics.quadrature import adaptive_quad, quad_geometric
from Riccati.solver import scaled_theta, solve_wq


class NumericalFault(RuntimeError):
    """Two independent evaluation routes disagree beyond tolerance."""


# ============================================================================
# REGIME AND ARGUMENT CHECKS
# ============================================================================

def require_absorption(mech):
    """
    Raises:
        RegimeError: If T_a is not almost surely finite from every start
    """
    if isinstance(mech, DiscreteMechanism):
        if not mech.d > 0:
            raise RegimeError("Extinction-time transforms need a positive death rate d")
        return
    if absorption_regime(mech) is not AbsorptionRegime.EXTINCTION_WITH_ABSORPTION:
        raise RegimeError("Extinction-time transforms need absorption: the integral of "
                          "1/psi at infinity must converge (gamma > 0)")


def _check_x(x):
    if np.isnan(x) or x < 0:
        raise ValueError(f"Initial state x must be nonnegative or inf, got {x}")


def _solution(mech, q, c, solution, tol):
    if solution is None:
        return solve_wq(mech, q, c=c, tol=tol)
    if solution.q != float(q):
        raise ValueError(f"Solution was computed for q={solution.q}, not q={q}")
    return solution


def _z_of_argument(funcs, arg):
    """
    z for a natural argument: lambda >= 0 (continuous) or s in [0, 1] (discrete).

    Returns -inf at the absorbing end (lambda = 0, s = 1) and +inf at the far end.
    """
    if funcs.setting == 'continuous':
        if np.isnan(arg) or arg < 0:
            raise ValueError(f"lambda must be nonnegative, got {arg}")
        if arg == 0:
            return -np.inf
        return np.inf if np.isinf(arg) else float(np.log(arg))
    if not 0.0 <= arg <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {arg}")
    if arg == 1.0:
        return -np.inf
    return np.inf if arg == 0.0 else funcs.z_of_x(arg)


# ============================================================================
# SWEEPS IN THE LOG COORDINATE
# ============================================================================

def _z_top(funcs):
    # lambda = e^z overflows long before a discrete z would matter
    return config.TRANSFORM_Z_MAX if funcs.setting == 'continuous' else np.inf


def stiff_edge(funcs, z_from):
    """First z >= z_from (and >= 0) where dm/dz reaches TRANSFORM_SLOPE_SWITCH."""
    z = max(float(z_from), 0.0)
    while z < config.TRANSFORM_Z_TAIL and funcs.dm_dz(z) < config.TRANSFORM_SLOPE_SWITCH:
        z += 0.25
    return max(z, float(z_from))


def _sweep(funcs, z_lo, z_hi, log_weight, source, start):
    """
    Integrate V' = e^{log_weight + log_jacobian} - (dm/dz) V and O' = source V.
    """
    def rhs(z, state):
        V = state[0]
        return np.array([
            np.exp(log_weight(z) + funcs.log_jacobian(z)) - funcs.dm_dz(z) * V,
            source(z) * V,
        ])

    return ode_solve(rhs, z_lo, start, z_hi, tol=config.RICCATI_ODE_TOL, atol=1e-30)


def _start_of_sweep(funcs, z_lo, x, log_weight, source):
    """
    V and O at the lower end, where theta ~ e^z and the kernel ~ x e^z.
    """
    V0 = np.exp(0.5 * log_weight(z_lo) - funcs.m_z(z_lo)) * funcs.s_of_z(z_lo)
    below = 1.0 if np.isinf(x) else 0.5
    return [float(V0), float(source(z_lo) * V0 * below)]


def _forward_tail(funcs, source, z0, tol):
    """int_{z0}^inf source(u) e^{m(z0) - m(u)} du."""
    m0 = float(funcs.m_z(z0))
    top = _z_top(funcs)
    integrand = lambda u: float(source(u) * np.exp(m0 - funcs.m_z(u)))
    width = 20.0 / max(abs(float(funcs.dm_dz(z0))), 1.0)
    near = adaptive_quad(integrand, z0, min(z0 + width, top), tol=tol).value
    if z0 + width >= top:
        return near
    return near + adaptive_quad(integrand, z0 + width, top, tol=tol).value


def _outer_integral(sol, x, z_upper=np.inf, tol=config.TOL):
    """
    O_x(z_upper) = int_{-inf}^{z_upper} dz e^{2W} speed int_z^inf q forcing k_x e^{-W}.
    """
    funcs, q = sol.functionals, sol.q
    c = funcs.c
    W = sol.W_of_z
    log_weight = lambda z: 2.0 * W(z)
    source = lambda z: q * funcs.kernel(z, x) * np.exp(-W(z)) / c

    z_lo = min(sol.z_min, z_upper - 1.0)
    z_cut = stiff_edge(funcs, sol.z_T)
    z_end = min(z_upper, z_cut)
    sweep = _sweep(funcs, z_lo, z_end, log_weight, source,
                   _start_of_sweep(funcs, z_lo, x, log_weight, source))
    V_end, O_end = (float(v) for v in sweep.y_end)
    if z_upper <= z_cut:
        return O_end + V_end * _forward_tail(funcs, source, z_end, tol)

    # Beyond the cut W = W(xi): V = e^{2W(xi)} U + e^{m_cut - m} (V_cut - e^{2W(xi)} U_cut)
    W_xi = sol.W_total
    U_cut = scaled_theta(funcs, z_cut, tol)
    excess = V_end - np.exp(2.0 * W_xi) * U_cut
    m_cut = float(funcs.m_z(z_cut))
    top = min(z_upper, _z_top(funcs))
    kernel = lambda u: float(funcs.kernel(u, x))

    through_theta = adaptive_quad(lambda u: kernel(u) * scaled_theta(funcs, u, tol),
                                  z_cut, top, tol=tol).value
    through_excess = adaptive_quad(lambda u: kernel(u) * np.exp(m_cut - funcs.m_z(u)),
                                   z_cut, top, tol=tol).value
    head = (q / c) * (np.exp(W_xi) * through_theta + np.exp(-W_xi) * excess * through_excess)
    if z_upper >= _z_top(funcs):
        return O_end + head

    V_upper = np.exp(2.0 * W_xi) * scaled_theta(funcs, z_upper, tol) \
        + np.exp(m_cut - funcs.m_z(z_upper)) * excess
    return O_end + head + V_upper * _forward_tail(funcs, source, z_upper, tol)


# ============================================================================
# TRANSFORMS
# ============================================================================

def laplace_Ta_infinity(mech, q, c=None, solution=None, tol=config.TOL_W):
    """
    E_inf[exp(-q T_a)] = exp(-W(xi)).

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism in the absorption regime
        q (float): Transform parameter, q > 0
        c (float): Competition rate (continuous mechanisms)
        solution (RiccatiSolution): Reuse a solution for this q
        tol (float): Shooting tolerance when solving here

    Returns:
        float: Value in (0, 1)
    """
    require_absorption(mech)
    sol = _solution(mech, q, c, solution, tol)
    return float(np.exp(-sol.W_total))


def laplace_Ta_from_x(mech, q, x, c=None, solution=None, tol=config.TOL_W):
    """
    E_x[exp(-q T_a)] = 1 - e^{-W(xi)} O_x(inf).

    The survival kernel is 1 - e^{-x lambda} (continuous) or 1 - s^x
    (discrete); x = inf gives back laplace_Ta_infinity.
    """
    require_absorption(mech)
    _check_x(x)
    if x == 0:
        return 1.0
    sol = _solution(mech, q, c, solution, tol)
    value = 1.0 - np.exp(-sol.W_total) * _outer_integral(sol, x)
    return float(value)


def resolvent_G(mech, q, x, lam, c=None, solution=None, tol=config.TOL_W):
    """
    q G_{q,x}(lambda) = q E_x int e^{-qt} e^{-lambda Z_t} dt.

    Args:
        mech (LevyMechanism): Non-subordinator mechanism
        q (float): q > 0
        x (float): Initial state, x >= 0
        lam (float): lambda >= 0

    Returns:
        float: q G in (0, 1]

    Raises:
        RegimeError: For discrete mechanisms
        ValueError: On domain violations
    """
    if isinstance(mech, DiscreteMechanism):
        raise RegimeError("The resolvent is evaluated for continuous mechanisms only")
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    _check_x(x)
    if np.isnan(lam) or lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if x == 0 or lam == 0:
        return 1.0
    sol = _solution(mech, q, c, solution, tol)
    if np.isinf(lam):
        require_absorption(mech)
        return laplace_Ta_from_x(mech, q, x, c=c, solution=sol)
    z = float(np.log(lam))
    value = 1.0 - np.exp(-sol.W_of_z(z)) * _outer_integral(sol, x, z)
    return float(value)


def entrance_law(mech, q, arg, c=None, solution=None, tol=config.TOL_W):
    """
    E_inf[exp(-lambda Z_tau)] = exp(-W(theta(lambda))), tau ~ Exp(q).

    For discrete mechanisms arg is the generating-function variable s in
    [0, 1] and the value is E_inf[s^{Z_tau}].
    """
    sol = _solution(mech, q, c, solution, tol)
    z = _z_of_argument(sol.functionals, arg)
    if z == -np.inf:
        return 1.0
    return float(np.exp(-sol.W_of_z(z)))


def integration_by_parts_identity(sol, arg, tol=config.TOL):
    """
    Both sides of
        int_0^{theta} dt e^{W(t)} int_t^xi ds q r^2(s) e^{-(W(s) - W(t))} = e^{W(theta)} - 1
    at theta = theta(arg).

    Returns:
        tuple: (left, right)
    """
    z = _z_of_argument(sol.functionals, arg)
    if z == -np.inf:
        return 0.0, 0.0
    left = _outer_integral(sol, np.inf, z, tol)
    return float(left), float(np.expm1(sol.W_of_z(z)))


# ============================================================================
# EXPECTED EXTINCTION TIME
# ============================================================================

def _expected_m_form_continuous(funcs, x, tol):
    """int_0^inf dl k(l) / (c l) int_0^l e^{m(s) - m(l)} ds."""
    mech, c = funcs.mech, funcs.c

    def inner(lam):
        m_lam = float(funcs.m(lam))
        g = lambda s: float(np.exp(funcs.m(s) - m_lam))
        slope = psi(mech, lam) / (c * lam)
        if slope * lam >= config.TRANSFORM_ASYMPTOTIC_SLOPE:
            return 1.0 / slope
        edge = 0.0 if slope <= 0 else max(lam - 20.0 / slope, 0.0)
        total = adaptive_quad(g, edge, lam, tol=tol).value
        if edge > 0:
            total += adaptive_quad(g, 0.0, edge, tol=tol).value
        return total

    def outer(lam):
        if lam == 0.0:
            return 1.0 / c if np.isinf(x) else 0.0
        kernel = 1.0 if np.isinf(x) else -np.expm1(-x * lam)
        return kernel * inner(lam) / (c * lam)

    return adaptive_quad(outer, 0.0, 1.0, tol=tol).value \
        + adaptive_quad(outer, 1.0, np.inf, tol=tol).value


def _expected_m_form_discrete(funcs, x, tol):
    """int_0^1 dv k(v) / (c v (1 - v)) int_v^1 e^{m(u) - m(v)} du, k(v) = 1 - v^x."""
    d, c = funcs.mech.d, funcs.c

    def outer(v):
        if v == 1.0:
            return 1.0 / c if np.isinf(x) else 0.0
        m_v = float(funcs.m(v))
        inner = quad_geometric(lambda u: float(np.exp(funcs.m(u) - m_v)), v, 1.0,
                               tol=tol, first_width=v).value
        kernel = 1.0 if np.isinf(x) else -np.expm1(x * np.log(v))
        return kernel * inner / (c * v * (1.0 - v))

    hints = {'a': d / c - 1.0} if d < c else None
    return adaptive_quad(outer, 0.0, 1.0, tol=tol, singularity_hints=hints).value


def _expected_s_form(funcs, x, tol):
    """
    int_0^xi ds s r^2(s) k(s), written in z as int U(z) k(z) / c dz with
    U = e^{-m} theta swept up to the stiff edge and integrated beyond it.
    """
    c = funcs.c
    z_lo = config.RICCATI_Z_MIN
    source = lambda z: funcs.kernel(z, x) / c
    flat = lambda z: 0.0
    z_cut = stiff_edge(funcs, 0.0)
    sweep = _sweep(funcs, z_lo, z_cut, flat, source,
                   _start_of_sweep(funcs, z_lo, x, flat, source))
    tail = adaptive_quad(lambda z: float(source(z)) * scaled_theta(funcs, z, tol),
                         z_cut, _z_top(funcs), tol=tol).value
    return float(sweep.y_end[1]) + tail


def expected_Ta_routes(mech, x=np.inf, c=None, tol=config.TOL):
    """
    E_x(T_a) by both routes: the m-form (nested quadrature in the natural
    variable) and the s-form (sweep in the log coordinate).

    Returns:
        tuple: (m-form value, s-form value)

    Raises:
        RegimeError: Outside the absorption regime
    """
    require_absorption(mech)
    _check_x(x)
    if x == 0:
        return 0.0, 0.0
    funcs = functionals_for(mech, c, tol=tol)
    if funcs.setting == 'continuous':
        by_m = _expected_m_form_continuous(funcs, x, tol)
    else:
        by_m = _expected_m_form_discrete(funcs, x, tol)
    return float(by_m), float(_expected_s_form(funcs, x, tol))


def expected_Ta(mech, x=np.inf, c=None, tol=config.TOL, verbose=False):
    """
    E_x(T_a), the mean absorption time from x (x = inf: from infinity).

    Computed by both routes of expected_Ta_routes, which must agree to
    ROUTE_AGREEMENT_TOL.

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism in the absorption regime
        x (float): Initial state, nonnegative or inf
        c (float): Competition rate (continuous mechanisms)
        tol (float): Quadrature tolerance
        verbose (bool): Print both routes

    Returns:
        float: E_x(T_a)

    Raises:
        RegimeError: Outside the absorption regime
        NumericalFault: If the two routes disagree
    """
    by_m, by_s = expected_Ta_routes(mech, x, c=c, tol=tol)
    if x == 0:
        return 0.0
    gap = abs(by_m - by_s) / max(abs(by_m), np.finfo(float).tiny)
    if verbose:
        mark = "✓" if gap <= config.ROUTE_AGREEMENT_TOL else "✗"
        print(f"  {mark} E_{x:g}(T_a): m-form {by_m:.12g}, s-form {by_s:.12g} "
              f"(relative gap {gap:.2e})")
    if gap > config.ROUTE_AGREEMENT_TOL:
        raise NumericalFault(f"E_x(T_a) routes disagree at x={x}: m-form {by_m:.12g}, "
                             f"s-form {by_s:.12g} (relative gap {gap:.2e})")
    return float(by_m)
