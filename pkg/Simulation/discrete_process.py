"""
Discrete Process Module
Exact event-driven simulation of the integer-valued logistic branching
process, its occupation measure and absorption times, and the rescaled
family converging to the Feller-logistic diffusion.
"""

import math
import sys
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import DiscreteMechanism, RegimeError
from Simulation.replicas import run_replicas
from Simulation.trajectory import ExtinctionBatch, Trajectory

# Integer labels that keep the substreams of different experiments apart
EXTINCTION_LABEL = 1
OCCUPATION_LABEL = 2
SCALING_LABEL = 3
HOLDING_LABEL = 4


def rates(mech, i):
    """
    Transition rates out of state i.

    Args:
        mech (DiscreteMechanism): Mechanism
        i (int): Current population size

    Returns:
        list: (target, rate) pairs; empty at the absorbing state 0
    """
    if i < 0:
        raise ValueError(f"State must be nonnegative, got {i}")
    if i == 0:
        return []
    out = [(i + k, i * rate) for k, rate in mech.pi.items() if rate > 0]
    death = mech.d * i + mech.c * i * (i - 1)
    if death > 0:
        out.append((i - 1, death))
    return out


def total_rate(mech, i):
    """Total outflow i(d + rho + c(i - 1))."""
    return i * (mech.d + mech.rho + mech.c * (i - 1))


class _EventLoop:
    """
    Gillespie loop for one replica.

    One exponential and one uniform per event, drawn from the replica's
    generator in blocks of DRAW_CHUNK. The uniform both picks birth vs death
    and, rescaled, the litter size.
    """

    def __init__(self, mech, rng):
        self.mech = mech
        self.rng = rng
        self.litters = np.array(list(mech.pi.keys()), dtype=np.int64)
        weights = np.array(list(mech.pi.values()), dtype=float)
        self.cum_weights = np.cumsum(weights) / weights.sum() if weights.size else weights
        self.single_litter = int(self.litters[0]) if self.litters.size == 1 else None
        self._refill()

    def _refill(self):
        self.exps = self.rng.standard_exponential(config.DRAW_CHUNK)
        self.unis = self.rng.random(config.DRAW_CHUNK)
        self.index = 0

    def run(self, x0, t_max, z_cap, on_hold=None, record=False):
        """
        Advance from x0 until absorption, t_max or z_cap.

        Args:
            on_hold (callable): Optional on_hold(state, t_enter, t_leave) per holding interval
            record (bool): Keep the jump records

        Returns:
            tuple: (times, states, absorbed_at, cap_hit)
        """
        mech = self.mech
        birth_rate, d, c = mech.rho, mech.d, mech.c
        i, t = int(x0), 0.0
        times, states = ([0.0], [i]) if record else (None, None)

        while True:
            if i == 0:
                return times, states, t, False
            births = i * birth_rate
            total = births + i * (d + c * (i - 1))

            if self.index == config.DRAW_CHUNK:
                self._refill()
            hold = self.exps[self.index] / total
            u = self.unis[self.index] * total
            self.index += 1

            if t + hold >= t_max:
                if on_hold is not None:
                    on_hold(i, t, t_max)
                return times, states, None, True
            if on_hold is not None:
                on_hold(i, t, t + hold)
            t += hold

            if u < births:
                if self.single_litter is not None:
                    i += self.single_litter
                else:
                    i += int(self.litters[np.searchsorted(self.cum_weights, u / births,
                                                          side='right')])
            else:
                i -= 1

            if record:
                times.append(t)
                states.append(i)
            if i > z_cap:
                return times, states, None, True


def _check_start(x0):
    if int(x0) != x0 or x0 < 0:
        raise ValueError(f"Initial state must be a nonnegative integer, got {x0}")
    return int(x0)


def simulate(mech, x0, cfg, stream):
    """
    Exact sample path from x0.

    Stops at absorption, at cfg.t_max, or when the state exceeds cfg.z_cap;
    the last two set cap_hit.

    Args:
        mech (DiscreteMechanism): Mechanism
        x0 (int): Initial population
        cfg (RunConfig): Run configuration
        stream (RandomStream): Replica stream

    Returns:
        Trajectory: Jump records
    """
    x0 = _check_start(x0)
    loop = _EventLoop(mech, stream.generator())
    times, states, absorbed_at, cap_hit = loop.run(x0, cfg.t_max, cfg.z_cap, record=True)
    metadata = {'seed': stream.seed, 'replica': stream.path[-1] if stream.path else 0,
                't_max': cfg.t_max}
    return Trajectory(np.array(times), np.array(states, dtype=np.int64), absorbed_at,
                      cap_hit, metadata=metadata)


def _occupation_kernel(stream, mech, x0, t_max, z_cap, burn_in):
    occupation = defaultdict(float)

    def on_hold(state, t_enter, t_leave):
        start = max(t_enter, burn_in)
        if t_leave > start:
            occupation[state] += t_leave - start

    _EventLoop(mech, stream.generator()).run(x0, t_max, z_cap, on_hold=on_hold)
    return dict(occupation)


def occupation_distribution(mech, x0, cfg, stream=None, verbose=False):
    """
    Time-weighted occupation frequencies over [burn_in, t_max].

    Args:
        mech (DiscreteMechanism): Mechanism with d = 0
        x0 (int): Initial population
        cfg (RunConfig): Run configuration
        stream (RandomStream): Stream to use (defaults to replica 0 of cfg.seed)
        verbose (bool): Print progress

    Returns:
        np.ndarray: p[i-1] = fraction of time spent in state i (sums to 1)

    Raises:
        RegimeError: If d != 0
        ValueError: If x0 = 0 or no time is left after burn_in
    """
    if mech.d != 0.0:
        raise RegimeError(f"The occupation law converges to mu only when d = 0, got d = {mech.d}")
    x0 = _check_start(x0)
    if x0 == 0:
        raise ValueError(
            "Occupation from x0 = 0 is empty: 0 is absorbing and no positive state is visited"
        )
    if stream is None:
        occupation = run_replicas(_occupation_kernel, 1, cfg.seed, labels=(OCCUPATION_LABEL,),
                                  args=(mech, x0, cfg.t_max, cfg.z_cap, cfg.burn_in))[0]
    else:
        occupation = _occupation_kernel(stream, mech, x0, cfg.t_max, cfg.z_cap, cfg.burn_in)
    if verbose:
        print(f"  Occupation over [{cfg.burn_in:g}, {cfg.t_max:g}]: "
              f"{len(occupation)} states visited")

    if not occupation:
        raise ValueError(
            f"No time recorded after burn_in = {cfg.burn_in:g} (t_max = {cfg.t_max:g})"
        )
    top = max(occupation)
    probabilities = np.zeros(top)
    for state, duration in occupation.items():
        probabilities[state - 1] = duration
    return probabilities / probabilities.sum()


def _extinction_kernel(stream, mech, x0, t_max, z_cap):
    _, _, absorbed_at, _ = _EventLoop(mech, stream.generator()).run(x0, t_max, z_cap)
    if absorbed_at is None:
        return t_max, True
    return absorbed_at, False


def extinction_samples(mech, x0, cfg, labels=(), verbose=False):
    """
    Absorption times of cfg.replicas independent replicas from x0.

    Args:
        mech (DiscreteMechanism): Mechanism with d > 0
        x0 (int): Initial population (use cfg.x_inf as a proxy for infinity)
        cfg (RunConfig): Run configuration
        labels (tuple): Extra stream labels (e.g. to separate two x0 values)
        verbose (bool): Print progress

    Returns:
        ExtinctionBatch: Samples with censoring flags

    Raises:
        RegimeError: If d = 0 (the process is never absorbed)
    """
    if mech.d <= 0.0:
        raise RegimeError("Extinction needs natural deaths: d = 0 is positive recurrent")
    x0 = _check_start(x0)
    if verbose:
        print(f"Simulating {cfg.replicas} extinction times from x0 = {x0}...")
    results = run_replicas(_extinction_kernel, cfg.replicas, cfg.seed,
                           labels=(EXTINCTION_LABEL,) + tuple(labels),
                           args=(mech, x0, cfg.t_max, cfg.z_cap), workers=cfg.workers,
                           verbose=verbose)
    samples = np.array([r[0] for r in results])
    censored = np.array([r[1] for r in results])
    batch = ExtinctionBatch(samples, censored, cfg.seed, x0, cfg.t_max)
    if verbose:
        marker = "⚠" if batch.censored_fraction > config.CENSORING_MAX else "✓"
        print(f"{marker} Censored: {int(censored.sum())}/{batch.n_replicas} "
              f"({100 * batch.censored_fraction:.3f}%)")
    return batch


def expected_Ta_infinity_discrete(mech, tol=config.TOL):
    """
    E_inf(T_a) from the double-integral formula (both quadrature routes).

    Raises:
        RegimeError: If d = 0
        NumericalFault: If the two routes disagree
    """
    from Riccati.transforms import expected_Ta
    return expected_Ta(mech, np.inf, tol=tol)


def birth_before_death_prob(mech, i):
    """
    Probability that the next event from state i is a birth, as an exact fraction.

    rho*i / ((rho + d)*i + c*i*(i - 1)), evaluated on the exact binary values
    of the float parameters.

    Raises:
        ValueError: If i < 1
    """
    if i < 1:
        raise ValueError(f"birth_before_death_prob needs i >= 1, got {i}")
    rho, d, c = Fraction(mech.rho), Fraction(mech.d), Fraction(mech.c)
    return rho * i / ((rho + d) * i + c * i * (i - 1))


def logistic_ode(b, c, z0, t):
    """
    Solution of dz/dt = b z - c z^2 from z0.

    Args:
        b (float): Linear growth rate
        c (float): Competition rate (> 0)
        z0 (float): Initial value (>= 0)
        t (float | np.ndarray): Times (>= 0)

    Returns:
        float | np.ndarray: z(t)
    """
    if not c > 0:
        raise ValueError(f"Competition rate c must be positive, got {c}")
    t = np.asarray(t, dtype=float)
    if z0 == 0:
        value = np.zeros_like(t)
    elif b == 0:
        value = z0 / (1.0 + c * z0 * t)
    elif b > 0:
        value = b * z0 / (b * np.exp(-b * t) - c * z0 * np.expm1(-b * t))
    else:
        value = b * z0 * np.exp(b * t) / (b + c * z0 * np.expm1(b * t))
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class Rescaling:
    """
    Z^(n)_t = N_{t/n} / n: states scaled by 1/n and time sped up by n.
    """
    n: int
    mech: DiscreteMechanism

    @property
    def state_scale(self):
        return 1.0 / self.n

    @property
    def time_scale(self):
        return 1.0 / self.n

    def upward_rate(self, z):
        """Rate of +1/n moves at scaled state z, in the unscaled clock."""
        return self.mech.rho * self.n * z

    def downward_rate(self, z):
        count = self.n * z
        return self.mech.d * count + self.mech.c * count * (count - 1)

    def initial_count(self, x):
        """Smallest count with count / n >= x, so the scaled start is ceil(n x) / n."""
        return math.ceil(x * self.n - 1e-9)


def scaled_family(n, lam, delta, gamma, c):
    """
    Binary mechanism with rho_n = gamma n^2 / 2 + lam n, d_n = gamma n^2 / 2 + delta n, c_n = c.

    Returns:
        tuple: (DiscreteMechanism, Rescaling)
    """
    for name, value in (('n', n), ('lambda', lam), ('delta', delta), ('gamma', gamma), ('c', c)):
        if not value > 0:
            raise ValueError(f"scaled_family needs {name} > 0, got {value}")
    mech = DiscreteMechanism(d=0.5 * gamma * n**2 + delta * n, c=c,
                             pi={1: 0.5 * gamma * n**2 + lam * n})
    return mech, Rescaling(int(n), mech)


def _scaled_marginal_kernel(stream, mech, n0, horizon, z_cap):
    loop = _EventLoop(mech, stream.generator())
    last = [n0]

    def on_hold(state, t_enter, t_leave):
        last[0] = state

    _, _, absorbed_at, _ = loop.run(n0, horizon, z_cap, on_hold=on_hold)
    return 0 if absorbed_at is not None else last[0]


def scaled_marginals(rescaling, x, t, cfg, verbose=False):
    """
    Samples of Z^(n)_t from Z^(n)_0 = x.

    Args:
        rescaling (Rescaling): Output of scaled_family
        x (float): Scaled initial state
        t (float): Scaled time
        cfg (RunConfig): Run configuration (replicas, seed, z_cap, workers)

    Returns:
        np.ndarray: cfg.replicas samples of N_{t/n} / n
    """
    n0 = rescaling.initial_count(x)
    horizon = t / rescaling.n
    if verbose:
        print(f"  n = {rescaling.n}: N0 = {n0}, horizon {horizon:.4g}")
    counts = run_replicas(_scaled_marginal_kernel, cfg.replicas, cfg.seed,
                          labels=(SCALING_LABEL, rescaling.n),
                          args=(rescaling.mech, n0, horizon, cfg.z_cap),
                          workers=cfg.workers)
    return np.asarray(counts, dtype=float) * rescaling.state_scale


def _holding_kernel(stream, mech, x0, state, t_max, z_cap):
    durations = []

    def on_hold(current, t_enter, t_leave):
        if current == state:
            durations.append((t_leave - t_enter, t_leave >= t_max))

    _EventLoop(mech, stream.generator()).run(x0, t_max, z_cap, on_hold=on_hold)
    return [duration for duration, censored in durations if not censored]


def holding_times(mech, x0, state, cfg):
    """
    Completed holding times in `state`, pooled across cfg.replicas replicas.

    Their law is exponential with rate state * (d + rho + c(state - 1)).
    """
    if state < 1:
        raise ValueError(f"Holding times are recorded for states >= 1, got {state}")
    pooled = run_replicas(_holding_kernel, cfg.replicas, cfg.seed, labels=(HOLDING_LABEL,),
                          args=(mech, _check_start(x0), int(state), cfg.t_max, cfg.z_cap),
                          workers=cfg.workers)
    return np.array([d for durations in pooled for d in durations])
