"""
Mechanism Functionals Module
The exponent m, exp(m), theta, its endpoint xi and inverse phi, and the
coefficient r of the Riccati forcing, in both settings.

Besides the natural argument (s in (0, 1] for discrete mechanisms, lambda
for continuous ones) every functional is available in a log coordinate z
on the whole real line: z -> -inf is the absorbing end (theta -> 0) and
z -> +inf the far end (theta -> xi). With phi = expit(-z) (discrete) or
lambda = e^z (continuous), theta becomes S(z) = int_{-inf}^z speed(u) du and
no inversion of theta is ever needed to walk along (0, xi).
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import (DiscreteMechanism, LevyMechanism, RegimeError, psi,
                                  levy_tail, require_condition_L)
from Numerics.quadrature import adaptive_quad, quad_geometric
from Numerics.roots import expand_bracket, find_root_bracketed

# Below this s the small-s asymptotic 1/sqrt(c s) replaces r
R_ASYMPTOTIC_S = 1e-12


def _as_output(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


class _LogCoordinate:
    """
    Walk along (0, xi) in the log coordinate z.

    Subclasses provide m_z(z), log_jacobian(z) (log of d theta / dz divided by
    e^m) and kernel(z, x).
    """

    def __init__(self, c, tol, tol_phi):
        self.c = float(c)
        self.tol = tol
        self.tol_phi = tol_phi
        self._s_at_zero = None
        self._gap_at_zero = None

    # -- z-coordinate quantities -------------------------------------------

    def log_speed(self, z):
        return self.m_z(z) + self.log_jacobian(z)

    def speed(self, z):
        """d theta / dz, so that S(z) = int_{-inf}^z speed."""
        return _as_output(np.exp(self.log_speed(z)))

    def log_forcing(self, z):
        return -self.m_z(z) - np.log(self.c)

    def forcing(self, z):
        """r^2 * speed = e^{-m} / c."""
        return _as_output(np.exp(self.log_forcing(z)))

    def log_r(self, z):
        return 0.5 * (self.log_forcing(z) - self.log_speed(z))

    def r_z(self, z):
        return _as_output(np.exp(self.log_r(z)))

    def dm_dz(self, z):
        """Slope of m along z, psi(x(z)) / c in both settings."""
        return _as_output(psi(self.mech, self.x_of_z(z)) / self.c)

    def s_of_z(self, z):
        """S(z) = theta at the point z."""
        z = float(z)
        if z == -np.inf:
            return 0.0
        if z <= 0.0:
            return adaptive_quad(self.speed, -np.inf, z, tol=self.tol).value
        if self._s_at_zero is None:
            self._s_at_zero = adaptive_quad(self.speed, -np.inf, 0.0, tol=self.tol).value
        return self._s_at_zero + adaptive_quad(self.speed, 0.0, z, tol=self.tol).value

    def gap_of_z(self, z):
        """xi - S(z) = int_z^inf speed; finite only when xi is."""
        if np.isinf(self.xi()):
            raise RegimeError("The gap to xi is only defined when xi is finite")
        z = float(z)
        if z >= 0.0:
            return adaptive_quad(self.speed, z, np.inf, tol=self.tol).value
        if self._gap_at_zero is None:
            self._gap_at_zero = adaptive_quad(self.speed, 0.0, np.inf, tol=self.tol).value
        return self._gap_at_zero + adaptive_quad(self.speed, z, 0.0, tol=self.tol).value

    def z_of_s(self, s):
        """Inverse of S: the z with theta = s."""
        xi = self.xi()
        if not 0.0 < s < xi:
            raise ValueError(f"s must lie in (0, xi) = (0, {xi:.6g}), got {s}")
        if np.isfinite(xi) and s > 0.5 * xi:
            gap = xi - s
            g = lambda z: self.gap_of_z(z) - gap
            step = 1.0 if g(0.0) > 0 else -1.0
            lo, hi = expand_bracket(g, 0.0, step)
        else:
            # S(z) is close to e^z for very negative z
            start = min(np.log(s), 0.0)
            g = lambda z: self.s_of_z(z) - s
            step = 1.0 if g(start) < 0 else -1.0
            lo, hi = expand_bracket(g, start, step)
        if lo == hi:
            return lo
        return find_root_bracketed(g, lo, hi, tol=self.tol_phi)

    # -- r on the natural s scale -----------------------------------------

    def r_small_s(self, s):
        """Asymptotic r(s) ~ 1/sqrt(c s) as s -> 0+."""
        s = np.asarray(s, dtype=float)
        return _as_output(1.0 / np.sqrt(self.c * s))

    def r_func(self, s):
        """
        r at theta-value s in (0, xi).

        Raises:
            ValueError: If s is outside (0, xi)
        """
        xi = self.xi()
        if not 0.0 < s < xi:
            raise ValueError(f"r is defined on (0, xi) = (0, {xi:.6g}), got {s}")
        if s < R_ASYMPTOTIC_S:
            return self.r_small_s(s)
        return float(np.exp(self.log_r(self.z_of_s(s))))


class DiscreteFunctionals(_LogCoordinate):
    """
    Functionals of a DiscreteMechanism.

    m(s) = log(beta) - (d/c) log(s) + sum_k pi_bar_k s^k / (c k) with
    beta = exp(-sum_k pi_bar_k / (c k)); theta(s) = int_s^1 e^m decreases
    from xi at s = 0 to 0 at s = 1.
    """

    setting = 'discrete'

    def __init__(self, mech, tol=config.TOL, tol_phi=config.TOL_PHI):
        require_condition_L(mech)
        super().__init__(mech.c, tol, tol_phi)
        self.mech = mech
        tails = mech.tails()
        k = np.arange(1, tails.size + 1)
        # Exponent polynomial sum_k pi_bar_k s^k / (c k), constant term zero
        self.exponent_coeffs = np.concatenate(([0.0], tails / (self.c * k)))
        self.log_beta = -float(np.sum(self.exponent_coeffs))
        self._xi = None

    # -- natural scale --------------------------------------------------------

    def m(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0.0) or np.any(s > 1.0):
            raise ValueError(f"m is defined on (0, 1], got {s}")
        poly = np.polynomial.polynomial.polyval(s, self.exponent_coeffs)
        return _as_output(self.log_beta - (self.mech.d / self.c) * np.log(s) + poly)

    def exp_m(self, s):
        s = np.asarray(s, dtype=float)
        if self.mech.d == 0.0 and np.all(s == 0.0):
            return float(np.exp(self.log_beta))
        return _as_output(np.exp(self.m(s)))

    def m_quadrature(self, s):
        """m(s) = int_s^1 psi(v) / (c v (1 - v)) dv by quadrature (test oracle)."""
        if not 0.0 < s <= 1.0:
            raise ValueError(f"m is defined on (0, 1], got {s}")
        tails = self.mech.tails()
        poly = np.concatenate(([0.0], tails))

        def integrand(v):
            return (self.mech.d - np.polynomial.polynomial.polyval(v, poly)) / (self.c * v)

        return adaptive_quad(integrand, s, 1.0, tol=self.tol).value

    def theta(self, s):
        """theta(s) = int_s^1 e^{m(v)} dv for s in [0, 1]."""
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"theta is defined on [0, 1], got {s}")
        if s == 0.0 and self.mech.d >= self.c:
            return np.inf
        hints = {'a': -self.mech.d / self.c} if (s == 0.0 and self.mech.d > 0) else None
        return adaptive_quad(self.exp_m, s, 1.0, tol=self.tol, singularity_hints=hints).value

    def xi(self):
        """theta(0); infinite exactly when d >= c."""
        if self.mech.d >= self.c:
            return np.inf
        if self._xi is None:
            self._xi = self.theta(0.0)
        return self._xi

    def phi(self, t):
        """
        Inverse of theta: the s in (0, 1] with theta(s) = t.

        Args:
            t (float): Value in [0, xi)

        Returns:
            float: phi(t)

        Raises:
            ValueError: If t is outside [0, xi)
        """
        xi = self.xi()
        if not 0.0 <= t < xi:
            raise ValueError(f"phi is defined on [0, xi) = [0, {xi:.6g}), got {t}")
        if t == 0.0:
            return 1.0

        # Root in u = log(s) so small roots keep their relative precision
        g = lambda u: self.theta(float(np.exp(u))) - t
        lo = np.log(0.5)
        while g(lo) < 0.0:
            lo *= 2.0
            if lo < np.log(np.finfo(float).tiny):
                raise ValueError(f"phi({t}) lies below the smallest representable s")
        return float(np.exp(find_root_bracketed(g, lo, 0.0, tol=self.tol_phi)))

    def r_limit_at_xi(self):
        """
        Limit of r at xi-: +inf if d < c/2, 1/(beta sqrt(c)) if d = c/2, 0 if d > c/2.
        """
        d, c = self.mech.d, self.c
        if d < 0.5 * c:
            return np.inf
        if d == 0.5 * c:
            return float(np.exp(-self.log_beta) / np.sqrt(c))
        return 0.0

    # -- log coordinate -------------------------------------------------------

    @staticmethod
    def log_x(z):
        """log(phi) at z, phi = expit(-z)."""
        return -np.logaddexp(0.0, z)

    @staticmethod
    def log_one_minus_x(z):
        return -np.logaddexp(0.0, -z)

    def x_of_z(self, z):
        return _as_output(np.exp(self.log_x(z)))

    def z_of_x(self, s):
        """z with phi = s."""
        return float(np.log1p(-s) - np.log(s))

    def m_z(self, z):
        log_s = self.log_x(z)
        poly = np.polynomial.polynomial.polyval(np.exp(log_s), self.exponent_coeffs)
        return self.log_beta - (self.mech.d / self.c) * log_s + poly

    def log_jacobian(self, z):
        return self.log_x(z) + self.log_one_minus_x(z)

    def kernel(self, z, x):
        """Survival kernel 1 - phi^x (x may be inf)."""
        if np.isinf(x):
            return _as_output(np.ones_like(np.asarray(z, dtype=float)))
        return _as_output(-np.expm1(x * self.log_x(z)))


class ContinuousFunctionals(_LogCoordinate):
    """
    Functionals of a LevyMechanism with competition rate c.

    m(lambda) = int_0^lambda psi(s) / (c s) ds; theta(lambda) = int_0^lambda e^m
    increases from 0 and xi is reported as +inf. route='subordinator' uses
    -m = delta*lambda/c + int (1 - e^{-lambda r}) Pi_bar(r) / (c r) dr for the
    jump part instead of one quadrature per atom.
    """

    setting = 'continuous'

    def __init__(self, mech, c, tol=config.TOL, tol_phi=config.TOL_PHI, route='quadrature'):
        if not c > 0:
            raise ValueError(f"Competition rate c must be positive, got {c}")
        if route not in ('quadrature', 'subordinator'):
            raise ValueError(f"Unknown route '{route}'")
        if route == 'subordinator' and not mech.is_subordinator:
            raise RegimeError("The subordinator route needs a subordinator mechanism")
        require_condition_L(mech)
        super().__init__(c, tol, tol_phi)
        self.mech = mech
        self.route = route

    # -- natural scale --------------------------------------------------------

    def _atom_m(self, r, rate, lam):
        compensate = r < 1.0

        def integrand(s):
            if s == 0.0:
                return -r + (r if compensate else 0.0)
            return (np.expm1(-s * r) + (s * r if compensate else 0.0)) / s

        return rate * quad_geometric(integrand, 0.0, lam, tol=self.tol,
                                     first_width=1.0 / r).value / self.c

    def _subordinator_jump_m(self, lam):
        mech = self.mech
        if lam == 0.0:
            return 0.0
        edges = [0.0] + sorted({r for r, _ in mech.atoms})

        def integrand(r):
            if r == 0.0:
                return lam * float(levy_tail(mech, 1e-300)) / self.c
            return -np.expm1(-lam * r) * float(levy_tail(mech, r)) / (self.c * r)

        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += adaptive_quad(integrand, lo, hi, tol=self.tol).value
        if mech.exp_rate > 0:
            total += adaptive_quad(integrand, edges[-1], np.inf, tol=self.tol).value
        return -total

    def m(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0.0):
            raise ValueError(f"m is defined on [0, inf), got {lam}")
        mech, c = self.mech, self.c

        if self.route == 'subordinator':
            value = -mech.delta * lam / c + np.vectorize(self._subordinator_jump_m)(lam)
            return _as_output(value)

        value = mech.alpha * lam / c + mech.gamma * lam**2 / (4.0 * c)
        if mech.exp_rate > 0:
            value = value - (mech.exp_rate / c) * np.log1p(lam / mech.kappa) \
                + lam * mech.exp_small_jump_mass / c
        for r, rate in mech.atoms:
            value = value + np.vectorize(lambda x: self._atom_m(r, rate, x))(lam)
        return _as_output(value)

    def exp_m(self, lam):
        return _as_output(np.exp(self.m(lam)))

    def theta(self, lam):
        """theta(lambda) = int_0^lambda e^{m(s)} ds."""
        if lam < 0.0:
            raise ValueError(f"theta is defined on [0, inf), got {lam}")
        return adaptive_quad(self.exp_m, 0.0, lam, tol=self.tol).value

    def xi(self):
        return np.inf

    def phi(self, t):
        """
        Inverse of theta on [0, inf).

        Raises:
            ValueError: If t < 0
            BracketError: If t exceeds the range of theta (bounded theta)
        """
        if t < 0.0:
            raise ValueError(f"phi is defined on [0, inf), got {t}")
        if t == 0.0:
            return 0.0
        g = lambda u: self.theta(float(np.exp(u))) - t
        start = float(np.log(t))
        step = 1.0 if g(start) < 0.0 else -1.0
        lo, hi = expand_bracket(g, start, step, upper_bound=np.log(np.finfo(float).max))
        if lo == hi:
            return float(np.exp(lo))
        return float(np.exp(find_root_bracketed(g, lo, hi, tol=self.tol_phi)))

    def r_limit_at_xi(self):
        """r vanishes at infinity for non-subordinator mechanisms."""
        if self.mech.is_subordinator:
            raise RegimeError("r at infinity is only used for non-subordinator mechanisms")
        return 0.0

    # -- log coordinate -------------------------------------------------------

    @staticmethod
    def log_x(z):
        return np.asarray(z, dtype=float)

    def x_of_z(self, z):
        return _as_output(np.exp(z))

    def z_of_x(self, lam):
        return float(np.log(lam))

    def m_z(self, z):
        return self.m(np.exp(z))

    def log_jacobian(self, z):
        return np.asarray(z, dtype=float)

    def kernel(self, z, x):
        """Survival kernel 1 - exp(-x lambda) (x may be inf)."""
        if np.isinf(x):
            return _as_output(np.ones_like(np.asarray(z, dtype=float)))
        return _as_output(-np.expm1(-x * np.exp(z)))


def functionals_for(mech, c=None, tol=config.TOL, tol_phi=config.TOL_PHI, **kwargs):
    """
    Functionals of either kind of mechanism.

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism
        c (float): Competition rate (required for LevyMechanism)
        tol (float): Quadrature tolerance
        tol_phi (float): Root-finding tolerance for phi

    Returns:
        DiscreteFunctionals | ContinuousFunctionals
    """
    if isinstance(mech, DiscreteMechanism):
        return DiscreteFunctionals(mech, tol=tol, tol_phi=tol_phi)
    if isinstance(mech, LevyMechanism):
        if c is None:
            raise ValueError("A continuous mechanism needs its competition rate c")
        return ContinuousFunctionals(mech, c, tol=tol, tol_phi=tol_phi, **kwargs)
    raise TypeError(f"Unsupported mechanism type {type(mech).__name__}")


def exp_m(mech, arg, c=None, tol=config.TOL):
    return functionals_for(mech, c, tol=tol).exp_m(arg)


def theta(mech, arg, c=None, tol=config.TOL):
    return functionals_for(mech, c, tol=tol).theta(arg)


def xi(mech, c=None, tol=config.TOL):
    return functionals_for(mech, c, tol=tol).xi()


def phi(mech, t, c=None, tol=config.TOL, tol_phi=config.TOL_PHI):
    return functionals_for(mech, c, tol=tol, tol_phi=tol_phi).phi(t)


def r_func(mech, s, c=None, tol=config.TOL, tol_phi=config.TOL_PHI):
    return functionals_for(mech, c, tol=tol, tol_phi=tol_phi).r_func(s)
