"""
Riccati Solver Module
The distinguished solution w_q of y' = y^2 - q r^2 on (0, xi), vanishing at xi.

Shots run in the log coordinate z of Mechanism.functionals, where the
equation reads dy/dz = speed * y^2 - q * forcing. Each shot starts from
y = 0 at the z with theta = T and integrates backward down to
RICCATI_Z_MIN. T is pushed toward xi until the solution stops moving on a
fixed comparison grid covering (0, T0); successive shots must increase.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.functionals import functionals_for
from Mechanism.mechanisms import DiscreteMechanism, RegimeError
from Numerics.ode import GuardViolation, StepSizeUnderflow, ode_solve
from Numerics.quadrature import adaptive_quad
from Numerics.roots import expand_bracket, find_root_bracketed


class ShootingError(RuntimeError):
    """Shots decreased between refinements, broke the envelope, or never settled."""


@dataclass(frozen=True)
class RiccatiSolution:
    """
    w_q on an increasing grid of theta-values s in (0, T], T close to xi.

    `dense` interpolates [y, W_hat] over [z_min, z_T] with y = w_q and
    W_hat(z) = int_{S(z)}^T w_q; `theta_dense` interpolates S(z).
    """
    q: float
    setting: str
    xi: float
    s: np.ndarray
    w: np.ndarray
    W: np.ndarray
    z: np.ndarray
    functionals: object = field(repr=False)
    dense: object = field(repr=False)
    theta_dense: object = field(repr=False)
    W_below: float = 0.0
    W_total: float = 0.0
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def z_min(self):
        return float(self.z[0])

    @property
    def z_T(self):
        return float(self.z[-1])

    @property
    def T(self):
        return float(self.s[-1])

    @property
    def max_residual(self):
        return self.diagnostics.get('max_residual', np.nan)

    def _w_near_zero(self, s):
        # w ~ (q/c) log(1/s) + const below the grid
        return self.w[0] + (self.q / self.functionals.c) * np.log(self.s[0] / s)

    def _W_near_zero(self, s):
        return s * (self._w_near_zero(s) + self.q / self.functionals.c)

    def w_of_z(self, z):
        z = float(z)
        if z >= self.z_T:
            return 0.0
        if z < self.z_min:
            return float(self._w_near_zero(self.functionals.s_of_z(z)))
        return float(self.dense(z)[0])

    def W_of_z(self, z):
        """W at the point z, constant W_total beyond the last shot."""
        z = float(z)
        if z >= self.z_T:
            return self.W_total
        if z == -np.inf:
            return 0.0
        if z < self.z_min:
            return float(self._W_near_zero(self.functionals.s_of_z(z)))
        return float(self.W_total - self.dense(z)[1])

    def theta_at(self, z):
        z = float(z)
        if self.z_min <= z <= self.z_T:
            return float(self.theta_dense(z)[0])
        return self.functionals.s_of_z(z)

    def z_at_theta(self, s):
        """z with S(z) = s for s on the grid range."""
        if not self.s[0] <= s <= self.T:
            return self.functionals.z_of_s(s)
        g = lambda z: float(self.theta_dense(z)[0]) - s
        return find_root_bracketed(g, self.z_min, self.z_T, tol=1e-13)


def require_wq_defined(mech):
    """
    Raises:
        RegimeError: If w_q is not defined for this mechanism
    """
    if isinstance(mech, DiscreteMechanism):
        if not mech.d > 0:
            raise RegimeError("w_q needs a positive death rate d (otherwise 0 is never reached)")
        return
    if mech.is_subordinator:
        raise RegimeError("w_q is only defined for non-subordinator mechanisms")


def scaled_theta(funcs, z, tol=config.TOL):
    """
    U(z) = e^{-m(z)} S(z) as one quadrature of e^{m(v) - m(z)} along z.

    Stays finite where S itself overflows; the mass sits within a few
    1 / (dm/dz) of the upper end.
    """
    slope = float(funcs.dm_dz(z))
    if slope >= config.TRANSFORM_ASYMPTOTIC_SLOPE:
        return float(np.exp(funcs.log_jacobian(z))) / slope
    m0 = float(funcs.m_z(z))
    integrand = lambda v: float(np.exp(funcs.m_z(v) - m0 + funcs.log_jacobian(v)))
    width = 20.0 / max(abs(slope), 1.0)
    near = adaptive_quad(integrand, z - width, z, tol=tol).value
    far = adaptive_quad(integrand, -np.inf, z - width, tol=tol).value
    return near + far


def scaled_gap(funcs, z, tol=config.TOL):
    """e^{-m(z)} (xi - S(z)) for finite xi."""
    m0 = float(funcs.m_z(z))
    integrand = lambda v: float(np.exp(funcs.m_z(v) - m0 + funcs.log_jacobian(v)))
    near = adaptive_quad(integrand, z, z + 1.0, tol=tol).value
    far = adaptive_quad(integrand, z + 1.0, np.inf, tol=tol).value
    return near + far


def _log_theta(funcs, z):
    return float(funcs.m_z(z)) + np.log(scaled_theta(funcs, z))


def _log_gap(funcs, z):
    return float(funcs.m_z(z)) + np.log(scaled_gap(funcs, z))


def shooting_endpoint(funcs, k, ratio=config.RICCATI_SCHEDULE_RATIO,
                      z_start=config.RICCATI_Z_START):
    """
    z_T of the k-th shot.

    Finite xi: T_k = xi - ratio^-k (xi - T0). Infinite xi: T_k = ratio^k T0.
    """
    if np.isfinite(funcs.xi()):
        target = _log_gap(funcs, z_start) - k * np.log(ratio)
        g = lambda z: _log_gap(funcs, z) - target
    else:
        target = _log_theta(funcs, z_start) + k * np.log(ratio)
        g = lambda z: target - _log_theta(funcs, z)
    lo, hi = expand_bracket(g, z_start, 1.0, upper_bound=700.0)
    if lo == hi:
        return lo
    return find_root_bracketed(g, lo, hi, tol=1e-10)


def _shoot(funcs, q, z_T, z_min):
    """One backward run of [y, W_hat] from y(z_T) = 0."""
    c = funcs.c
    zone = config.ENVELOPE_ZONE_FRACTION * (z_T - z_min)
    bound = config.ENVELOPE_SAFETY * np.sqrt(q)

    def rhs(z, state):
        y = state[0]
        m = funcs.m_z(z)
        speed = np.exp(m + funcs.log_jacobian(z))
        forcing = np.exp(-m) / c
        return np.array([speed * y * y - q * forcing, -y * speed])

    def guard(z, state):
        if z_min + zone < z < z_T - zone:
            return True
        return state[0] <= bound * funcs.r_z(z)

    try:
        return ode_solve(rhs, z_T, [0.0, 0.0], z_min, tol=config.RICCATI_ODE_TOL,
                         guard=guard, atol=config.RICCATI_ODE_TOL * 1e-2)
    except GuardViolation as e:
        raise ShootingError(f"Shot from z_T={z_T:.4f} left the sqrt(q) r envelope: {e}") from e
    except StepSizeUnderflow as e:
        raise ShootingError(f"Shot from z_T={z_T:.4f} failed: {e}") from e


def _residuals(funcs, q, dense, z_grid):
    """Relative residual |w' - w^2 + q r^2| / (1 + w^2 + q r^2) at interior grid points."""
    h = config.RESIDUAL_STEP
    z_lo, z_hi = z_grid[0], z_grid[-1]
    inner = z_grid[(z_grid - 2 * h > z_lo) & (z_grid + 2 * h < z_hi)]
    if inner.size == 0:
        return inner, inner

    y = lambda zz: dense(zz)[0]
    dy = (-y(inner + 2 * h) + 8 * y(inner + h) - 8 * y(inner - h) + y(inner - 2 * h)) / (12 * h)
    yz = y(inner)
    speed = np.atleast_1d(funcs.speed(inner))
    forcing = np.atleast_1d(funcs.forcing(inner))
    residual = np.abs(dy - speed * yz**2 + q * forcing) / (speed * (1.0 + yz**2) + q * forcing)
    return inner, residual


def _endpoint_checks(funcs, q, z_grid, y_grid):
    zone = config.ENVELOPE_ZONE_FRACTION * (z_grid[-1] - z_grid[0])
    low = z_grid <= z_grid[0] + zone
    high = (z_grid >= z_grid[-1] - zone) & (z_grid < z_grid[-1])
    envelope = np.sqrt(q) * np.atleast_1d(funcs.r_z(z_grid[low | high]))
    envelope_ok = bool(np.all(y_grid[low | high] <= envelope))

    slack = config.MONOTONE_SLACK
    decreasing = all(
        bool(np.all(np.diff(y_grid[mask]) <= slack * (1.0 + np.abs(y_grid[mask][:-1]))))
        for mask in (low, z_grid >= z_grid[-1] - zone)
    )
    return envelope_ok, decreasing


def solve_wq(mech, q, c=None, tol=config.TOL_W, k_max=config.K_MAX,
             schedule_ratio=config.RICCATI_SCHEDULE_RATIO, z_min=config.RICCATI_Z_MIN,
             verbose=False):
    """
    Solve for w_q by the limit of backward shots kappa_T, T -> xi.

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism (discrete d > 0,
            or continuous non-subordinator)
        q (float): Transform parameter, q > 0
        c (float): Competition rate (continuous mechanisms)
        tol (float): Sup-norm change on the comparison grid that ends refinement
        k_max (int): Maximum number of refinements
        schedule_ratio (float): Geometric ratio of the T schedule, > 1
        z_min (float): Lower end of the log coordinate
        verbose (bool): Print one line per shot

    Returns:
        RiccatiSolution: Converged solution with diagnostics

    Raises:
        ValueError: If q <= 0 or schedule_ratio <= 1
        RegimeError: If w_q is not defined for mech
        ShootingError: On a decreasing shot, an envelope violation, or no convergence
    """
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    if not schedule_ratio > 1:
        raise ValueError(f"schedule_ratio must exceed 1, got {schedule_ratio}")
    require_wq_defined(mech)
    q = float(q)
    funcs = functionals_for(mech, c)
    xi = funcs.xi()
    comparison = np.linspace(z_min, config.RICCATI_Z_START, config.COMPARISON_GRID_SIZE)

    if verbose:
        print(f"\nSolving for w_q (q={q:g}, {funcs.setting}, xi={xi:.6g})")
        print("-" * 60)

    endpoints, history = [], []
    previous, shot = None, None
    for k in range(1, k_max + 1):
        z_T = shooting_endpoint(funcs, k, ratio=schedule_ratio)
        shot = _shoot(funcs, q, z_T, z_min)
        values = shot(comparison)[0]
        endpoints.append(z_T)

        if previous is not None:
            change = values - previous
            scale = 1.0 + np.abs(values)
            if np.any(change < -config.MONOTONE_SLACK * scale):
                worst = float(comparison[np.argmin(change / scale)])
                raise ShootingError(
                    f"Shot {k} fell below shot {k - 1} near z={worst:.3f}; "
                    "the integration is not trustworthy"
                )
            sup_change = float(np.max(np.abs(change) / scale))
            history.append(sup_change)
            if verbose:
                print(f"  shot {k:2d}: z_T={z_T:8.4f}  sup change={sup_change:.3e}")
            if sup_change < tol:
                break
        elif verbose:
            print(f"  shot {k:2d}: z_T={z_T:8.4f}")
        previous = values
    else:
        raise ShootingError(f"No convergence after {k_max} refinements (last change "
                            f"{history[-1] if history else np.nan:.3e} >= {tol:.1e})")

    return _assemble(funcs, q, shot, z_min, endpoints, history, verbose)


def _endpoint_thetas(funcs, z_endpoints):
    """Shooting endpoints T_k on the theta scale."""
    xi = funcs.xi()
    if np.isfinite(xi):
        return [float(xi - np.exp(_log_gap(funcs, z))) for z in z_endpoints]
    return [float(np.exp(_log_theta(funcs, z))) for z in z_endpoints]


def _assemble(funcs, q, shot, z_min, endpoints, history, verbose):
    z_grid = shot.t[::-1].copy()
    y_grid = shot.y[::-1, 0].copy()
    w_hat = shot.y[::-1, 1].copy()

    s_min = funcs.s_of_z(z_min)
    theta_dense = ode_solve(lambda z, y: np.array([funcs.speed(z)]), z_min, [s_min],
                            z_grid[-1], tol=config.RICCATI_ODE_TOL,
                            atol=s_min * config.RICCATI_ODE_TOL)
    s_grid = np.asarray(theta_dense(z_grid))[0]

    # w ~ (q/c) log(1/s) below s_min
    W_below = s_min * (y_grid[0] + q / funcs.c)
    W_total = W_below + w_hat[0]
    W_grid = W_total - w_hat

    _, residual = _residuals(funcs, q, shot, z_grid)
    envelope_ok, decreasing = _endpoint_checks(funcs, q, z_grid, y_grid)
    diagnostics = {
        'max_residual': float(np.max(residual)) if residual.size else 0.0,
        'endpoints': _endpoint_thetas(funcs, endpoints),
        'z_endpoints': [float(z) for z in endpoints],
        'history': history,
        'refinements': len(endpoints),
        'envelope_ok': envelope_ok,
        'decreasing_at_ends': decreasing,
        'positive': bool(np.all(y_grid[:-1] > 0)),
        'n_evaluations': shot.n_evaluations,
        'n_rejected': shot.n_rejected,
    }

    if verbose:
        mark = "✓" if diagnostics['max_residual'] < config.TOL_RES else "⚠"
        print(f"  {mark} {len(z_grid)} grid points, W(xi)={W_total:.8f}, "
              f"max residual={diagnostics['max_residual']:.2e}")
        if not envelope_ok:
            print("  ⚠ w exceeds sqrt(q) r in an endpoint zone")

    return RiccatiSolution(
        q=q, setting=funcs.setting, xi=funcs.xi(), s=s_grid, w=y_grid, W=W_grid,
        z=z_grid, functionals=funcs, dense=shot, theta_dense=theta_dense,
        W_below=float(W_below), W_total=float(W_total), diagnostics=diagnostics,
    )


def integral_wq(sol, upper):
    """
    W(upper) = int_0^upper w_q.

    Below the grid the small-s form w ~ (q/c) log(1/s) is integrated in
    closed form; beyond the last shot endpoint W is W(xi).

    Raises:
        ValueError: If upper is outside [0, xi]
    """
    if not 0.0 <= upper <= sol.xi:
        raise ValueError(f"upper must lie in [0, xi] = [0, {sol.xi:.6g}], got {upper}")
    if upper == 0.0:
        return 0.0
    if upper >= sol.T:
        return sol.W_total
    if upper <= sol.s[0]:
        return float(sol._W_near_zero(upper))
    return sol.W_of_z(sol.z_at_theta(upper))
