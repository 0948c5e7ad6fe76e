"""
Branching Mechanism Module
Discrete (integer-state) and Levy (continuous-state) branching mechanisms,
their exponent psi, jump tails and the regime predicates built on them.
"""

import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import ClassVar

import numpy as np
from numpy.polynomial import polynomial
from scipy.special import exp1

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


class RegimeError(ValueError):
    """The mechanism lies outside the regime a formula is valid in."""


class AbsorptionRegime(Enum):
    RECURRENT = "Recurrent"
    EXTINCTION_WITH_ABSORPTION = "ExtinctionWithAbsorption"
    EXTINCTION_WITHOUT_ABSORPTION = "ExtinctionWithoutAbsorption"


@dataclass(frozen=True)
class DiscreteMechanism:
    """
    Integer-state mechanism: litters of size k at per-capita rate pi[k],
    natural deaths at rate d, pairwise competition at rate c.
    """
    d: float
    c: float
    pi: dict = field(default_factory=dict)

    setting: ClassVar[str] = 'discrete'

    def __post_init__(self):
        pi = {}
        for k, rate in dict(self.pi).items():
            k_int = int(k)
            if k_int != float(k) or k_int < 1:
                raise ValueError(f"Litter sizes must be integers >= 1, got {k}")
            if rate < 0:
                raise ValueError(f"Litter rate pi[{k_int}] must be nonnegative, got {rate}")
            pi[k_int] = float(rate)
        object.__setattr__(self, 'pi', dict(sorted(pi.items())))
        object.__setattr__(self, 'd', float(self.d))
        object.__setattr__(self, 'c', float(self.c))

        if not self.c > 0:
            raise ValueError(f"Competition rate c must be positive, got {self.c}")
        if self.d < 0:
            raise ValueError(f"Death rate d must be nonnegative, got {self.d}")
        if self.d == 0 and self.rho == 0:
            raise ValueError("At least one of d and rho = sum(pi) must be positive")

    @classmethod
    def binary(cls, rho, c, d=0.0):
        """Binary splitting at rate rho."""
        return cls(d=d, c=c, pi={1: rho})

    @property
    def rho(self):
        return float(sum(self.pi.values()))

    @property
    def max_litter(self):
        return max(self.pi) if self.pi else 0

    def tails(self):
        """
        Tail sums pi_bar_k = sum_{i >= k} pi_i for k = 1..K.

        Returns:
            np.ndarray: K-length array, entry k-1 holds pi_bar_k
        """
        rates = np.zeros(self.max_litter)
        for k, rate in self.pi.items():
            rates[k - 1] = rate
        return np.cumsum(rates[::-1])[::-1]

    def psi_coefficients(self):
        """Power-series coefficients of psi(s) = d - (rho + d)s + sum pi_i s^(i+1)."""
        coeffs = np.zeros(self.max_litter + 2)
        coeffs[0] = self.d
        coeffs[1] = -(self.rho + self.d)
        for k, rate in self.pi.items():
            coeffs[k + 1] += rate
        return coeffs

    def log_moment(self):
        return float(sum(rate * np.log(k) for k, rate in self.pi.items()))


@dataclass(frozen=True)
class LevyMechanism:
    """
    Spectrally positive Levy mechanism with finite-activity jumps.

    Stored in compensated form: psi(l) = alpha*l + gamma*l^2/2
    + int (e^{-lr} - 1 + lr 1_{r<1}) Pi(dr). The jump measure is a finite set
    of atoms (r, rate) plus at most one exponential density component of
    total rate exp_rate and mean jump size exp_mean.
    """
    alpha: float
    gamma: float = 0.0
    atoms: tuple = ()
    exp_rate: float = 0.0
    exp_mean: float = 1.0

    setting: ClassVar[str] = 'continuous'

    def __post_init__(self):
        atoms = []
        for atom in self.atoms:
            r, rate = (float(v) for v in atom)
            if not r > 0:
                raise ValueError(f"Jump sizes must be positive, got {r}")
            if not rate > 0:
                raise ValueError(f"Jump rates must be positive, got {rate}")
            atoms.append((r, rate))
        object.__setattr__(self, 'atoms', tuple(atoms))
        object.__setattr__(self, 'alpha', float(self.alpha))
        object.__setattr__(self, 'gamma', float(self.gamma))
        object.__setattr__(self, 'exp_rate', float(self.exp_rate))
        object.__setattr__(self, 'exp_mean', float(self.exp_mean))

        if self.gamma < 0:
            raise ValueError(f"Gaussian coefficient gamma must be nonnegative, got {self.gamma}")
        if self.exp_rate < 0:
            raise ValueError(f"Exponential jump rate must be nonnegative, got {self.exp_rate}")
        if not self.exp_mean > 0:
            raise ValueError(f"Exponential mean jump size must be positive, got {self.exp_mean}")

    @classmethod
    def from_uncompensated(cls, b, gamma=0.0, atoms=(), exp_rate=0.0, exp_mean=1.0):
        """
        Build from the linear drift b of psi(l) = -b*l + gamma*l^2/2 - int (1 - e^{-lr}) Pi(dr).

        Args:
            b (float): Uncompensated drift (growth rate of the mean between jumps)
            gamma (float): Gaussian coefficient
            atoms (iterable): (r, rate) pairs
            exp_rate (float): Total rate of exponentially distributed jumps
            exp_mean (float): Mean of those jumps

        Returns:
            LevyMechanism: Equivalent compensated mechanism
        """
        draft = cls(alpha=0.0, gamma=gamma, atoms=tuple(atoms), exp_rate=exp_rate,
                    exp_mean=exp_mean)
        return cls(alpha=-float(b) - draft.small_jump_mass, gamma=gamma, atoms=draft.atoms,
                   exp_rate=exp_rate, exp_mean=exp_mean)

    @property
    def kappa(self):
        return 1.0 / self.exp_mean

    @property
    def rho(self):
        """Total jump rate."""
        return float(sum(rate for _, rate in self.atoms) + self.exp_rate)

    @property
    def exp_small_jump_mass(self):
        """Share of the compensator carried by the exponential component."""
        kappa = self.kappa
        return float(self.exp_rate * (-np.expm1(-kappa) - kappa * np.exp(-kappa)) / kappa)

    @property
    def small_jump_mass(self):
        """Compensator int_{r<1} r Pi(dr)."""
        atoms_part = sum(r * rate for r, rate in self.atoms if r < 1.0)
        return float(atoms_part + self.exp_small_jump_mass)

    @property
    def drift_b(self):
        """Uncompensated linear drift b."""
        return -self.alpha - self.small_jump_mass

    @property
    def is_subordinator(self):
        return (self.gamma == 0.0
                and self.drift_b >= -config.SUBORDINATOR_DRIFT_TOL * (1.0 + abs(self.alpha)))

    @property
    def delta(self):
        """
        Drift of the subordinator form psi(l) = -delta*l - int (1 - e^{-lr}) Pi(dr).

        Raises:
            RegimeError: If the mechanism is not a subordinator
        """
        if not self.is_subordinator:
            raise RegimeError("delta is defined for subordinator mechanisms only")
        return max(self.drift_b, 0.0)

    def jump_part(self, lam):
        """int (1 - e^{-lr}) Pi(dr), elementwise."""
        lam = np.asarray(lam, dtype=float)
        total = np.zeros_like(lam)
        for r, rate in self.atoms:
            total = total - rate * np.expm1(-lam * r)
        if self.exp_rate > 0:
            total = total + self.exp_rate * lam / (self.kappa + lam)
        return total

    def log_moment_finite(self):
        """int_{r>1} log(r) Pi(dr) (finite for atoms and exponential tails)."""
        atoms_part = sum(rate * np.log(r) for r, rate in self.atoms if r > 1.0)
        if self.exp_rate > 0:
            # int_1^inf log(r) kappa e^{-kappa r} dr = E1(kappa)
            atoms_part += self.exp_rate * exp1(self.kappa)
        return float(atoms_part)


# ============================================================================
# OPERATIONS
# ============================================================================

def _check_discrete_arg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0) or np.any(np.isnan(s)):
        raise ValueError(f"Discrete psi is defined on [0, 1], got {s}")
    return s


def _check_continuous_arg(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0.0) or np.any(np.isnan(lam)):
        raise ValueError(f"Continuous psi is defined on [0, inf), got {lam}")
    return lam


def psi_factored(mech, s):
    """(1 - s)(d - sum_k pi_bar_k s^k): discrete psi without cancellation near s = 1."""
    s = _check_discrete_arg(s)
    tails = mech.tails()
    inner = polynomial.polyval(s, np.concatenate(([0.0], tails)))
    return (1.0 - s) * (mech.d - inner)


def psi(mech, arg):
    """
    Branching mechanism psi at arg.

    Discrete mechanisms use the expanded polynomial for s <= 1/2 and the
    factored form above it.

    Args:
        mech (DiscreteMechanism | LevyMechanism): Mechanism
        arg (float | np.ndarray): s in [0, 1] (discrete) or lambda >= 0 (continuous)

    Returns:
        float | np.ndarray: psi(arg)

    Raises:
        ValueError: If arg is outside the domain
    """
    if isinstance(mech, DiscreteMechanism):
        s = _check_discrete_arg(arg)
        expanded = polynomial.polyval(s, mech.psi_coefficients())
        value = np.where(s <= 0.5, expanded, psi_factored(mech, s))
        return float(value) if value.ndim == 0 else value

    lam = _check_continuous_arg(arg)
    value = mech.alpha * lam + 0.5 * mech.gamma * lam**2
    for r, rate in mech.atoms:
        value = value + rate * (np.expm1(-lam * r) + (lam * r if r < 1.0 else 0.0))
    if mech.exp_rate > 0:
        value = value - mech.exp_rate * lam / (mech.kappa + lam) + lam * mech.exp_small_jump_mass
    return float(value) if np.ndim(value) == 0 else value


def psi_subordinator(mech, lam):
    """
    Subordinator form -delta*l - int (1 - e^{-lr}) Pi(dr).

    Raises:
        RegimeError: If mech is not a subordinator
    """
    lam = _check_continuous_arg(lam)
    value = -mech.delta * lam - mech.jump_part(lam)
    return float(value) if np.ndim(value) == 0 else value


def tail(mech, k):
    """pi_bar_k = sum_{i >= k} pi_i for k >= 1."""
    if k < 1:
        raise ValueError(f"Tail index must be >= 1, got {k}")
    return float(sum(rate for i, rate in mech.pi.items() if i >= k))


def levy_tail(mech, y):
    """Pi_bar(y) = Pi((y, inf)) for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError(f"Levy tail is defined for y > 0, got {y}")
    total = np.zeros_like(y)
    for r, rate in mech.atoms:
        total = total + np.where(r > y, rate, 0.0)
    if mech.exp_rate > 0:
        total = total + mech.exp_rate * np.exp(-mech.kappa * y)
    return float(total) if total.ndim == 0 else total


def condition_L(mech):
    """
    Log-moment condition on litter / jump sizes.

    Holds for every mechanism these types can represent; kept as an explicit
    check so downstream formulas can assert their hypothesis.
    """
    if isinstance(mech, DiscreteMechanism):
        return bool(np.isfinite(mech.log_moment()))
    return bool(np.isfinite(mech.log_moment_finite()))


def require_condition_L(mech):
    if not condition_L(mech):
        raise RegimeError("Condition (L) fails: the log-moment of the jump sizes is infinite")


def condition_partial(mech, c):
    """
    Positive-recurrence condition for subordinator mechanisms.

    True iff delta > 0 or c < rho. The branch rho = inf is unreachable with
    finite activity.

    Raises:
        RegimeError: If mech is not a subordinator
    """
    if not mech.is_subordinator:
        raise RegimeError("Condition (d) is stated for subordinator mechanisms only")
    if mech.delta > 0:
        return True
    return bool(c < mech.rho < np.inf)


def absorption_regime(mech):
    """
    Long-run behaviour of the continuous process.

    Subordinators are recurrent. Otherwise the integral of 1/psi at infinity
    converges iff gamma > 0 (psi grows quadratically); with gamma = 0 and
    finite activity psi(l)/l stays bounded and the process dies out without
    reaching 0.
    """
    if mech.is_subordinator:
        return AbsorptionRegime.RECURRENT
    if mech.gamma > 0:
        return AbsorptionRegime.EXTINCTION_WITH_ABSORPTION
    return AbsorptionRegime.EXTINCTION_WITHOUT_ABSORPTION


def mechanism_from_dict(params):
    """
    Build a mechanism from a plain parameter dict (config-file layout).

    Returns:
        tuple: (mechanism, c)
    """
    setting = params.get('setting', 'discrete')
    if setting == 'discrete':
        mech = DiscreteMechanism(d=params.get('d', 0.0), c=params['c'],
                                 pi=params.get('pi', {}))
        return mech, mech.c
    if setting != 'continuous':
        raise ValueError(f"Unknown setting '{setting}' (expected 'discrete' or 'continuous')")

    exp_jumps = params.get('exp_jumps') or {}
    kwargs = dict(gamma=params.get('gamma', 0.0),
                  atoms=tuple(tuple(a) for a in params.get('atoms', ())),
                  exp_rate=exp_jumps.get('rate', 0.0), exp_mean=exp_jumps.get('mean', 1.0))
    if 'alpha' in params and 'b' in params:
        raise ValueError("Give either 'alpha' (compensated) or 'b' (uncompensated), not both")
    if 'b' in params:
        mech = LevyMechanism.from_uncompensated(params['b'], **kwargs)
    else:
        mech = LevyMechanism(alpha=params.get('alpha', 0.0), **kwargs)
    c = float(params['c'])
    if not c > 0:
        raise ValueError(f"Competition rate c must be positive, got {c}")
    return mech, c


def mechanism_to_dict(mech, c=None):
    """Inverse of mechanism_from_dict (canonical compensated alpha for Levy mechanisms)."""
    if isinstance(mech, DiscreteMechanism):
        return {'setting': 'discrete', 'd': mech.d, 'c': mech.c,
                'pi': {str(k): rate for k, rate in mech.pi.items()}}
    if c is None:
        raise ValueError("A continuous mechanism needs its competition rate c")
    params = {'setting': 'continuous', 'alpha': mech.alpha, 'gamma': mech.gamma,
              'c': float(c)}
    if mech.atoms:
        params['atoms'] = [[r, rate] for r, rate in mech.atoms]
    if mech.exp_rate > 0:
        params['exp_jumps'] = {'rate': mech.exp_rate, 'mean': mech.exp_mean}
    return params
