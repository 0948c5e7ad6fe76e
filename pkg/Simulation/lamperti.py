"""
Lamperti Route Module
Ornstein-Uhlenbeck type paths dR = dX - cR dt driven by a finite-activity
spectrally positive Levy process, and the additive time change
eta_t = int_0^{t ^ T_0} ds / R_s turning them into logistic branching paths
Z_t = R(C_t), C the right inverse of eta.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Simulation.trajectory import Trajectory

# Bisection levels used to locate a zero crossing inside one OU step
BRIDGE_LEVELS = 40


@dataclass
class OUPath:
    """
    Records of an OU-type path.

    values[k] is R(t_k) and left[k] the left limit R(t_k-); they differ only
    at jump times. t0 is the first passage time to 0 when it was reached.
    """
    times: np.ndarray
    values: np.ndarray
    left: np.ndarray
    b: float
    c: float
    gamma: float
    jumps: list = field(default_factory=list)
    t0: float = None
    cap_hit: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.left = np.asarray(self.left, dtype=float)

    @classmethod
    def from_grid(cls, times, values, b, c, gamma):
        """Continuous path given on a grid (left limits equal the values)."""
        values = np.asarray(values, dtype=float)
        return cls(times, values, values.copy(), b, c, gamma)

    @property
    def drift_level(self):
        """Level b/c that the deterministic part of R relaxes to."""
        return self.b / self.c


class _Draws:
    """Chunked normal / exponential / uniform draws from one generator."""

    def __init__(self, rng):
        self.rng = rng
        self._normals, self._exps, self._unis = self._block('n'), self._block('e'), self._block('u')
        self._i_n = self._i_e = self._i_u = 0

    def _block(self, kind):
        if kind == 'n':
            return self.rng.standard_normal(config.DRAW_CHUNK)
        if kind == 'e':
            return self.rng.standard_exponential(config.DRAW_CHUNK)
        return self.rng.random(config.DRAW_CHUNK)

    def normal(self):
        if self._i_n == config.DRAW_CHUNK:
            self._normals, self._i_n = self._block('n'), 0
        self._i_n += 1
        return self._normals[self._i_n - 1]

    def exponential(self):
        if self._i_e == config.DRAW_CHUNK:
            self._exps, self._i_e = self._block('e'), 0
        self._i_e += 1
        return self._exps[self._i_e - 1]

    def uniform(self):
        if self._i_u == config.DRAW_CHUNK:
            self._unis, self._i_u = self._block('u'), 0
        self._i_u += 1
        return self._unis[self._i_u - 1]


def _ou_moments(x, h, level, c, gamma):
    """Mean and variance of the Gaussian OU transition over h."""
    decay = np.exp(-c * h)
    mean = x * decay - level * np.expm1(-c * h)
    variance = -gamma * np.expm1(-2.0 * c * h) / (2.0 * c)
    return mean, variance, decay


def deterministic_eta(x, h, level, c):
    """
    int_0^h ds / R_s for R_s = level + (x - level) e^{-cs} (no noise, no jumps).

    Infinite when R reaches 0 within h.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        if level == 0.0:
            value = np.expm1(c * h) / (c * x)
        else:
            argument = level * np.expm1(c * h) / x
            value = np.where(argument > -1.0, np.log1p(np.maximum(argument, -1.0)) / (c * level),
                             np.inf)
    return float(value) if value.ndim == 0 else value


def deterministic_eta_inverse(x, remaining, level, c):
    """The h with deterministic_eta(x, h) = remaining (elementwise)."""
    x = np.asarray(x, dtype=float)
    remaining = np.asarray(remaining, dtype=float)
    with np.errstate(over='ignore'):
        if level == 0.0:
            value = np.log1p(c * x * remaining) / c
        else:
            value = np.log1p(x * np.expm1(c * level * remaining) / level) / c
    return float(value) if value.ndim == 0 else value


def _deterministic_crossing(x, level, c):
    """Time for level + (x - level) e^{-cs} to reach 0 (inf if it never does)."""
    if level >= 0.0:
        return np.inf
    return float(np.log((x - level) / -level) / c)


def _sample_jump(draws, atoms, atom_cum, exp_mean, rho):
    u = draws.uniform() * rho
    for (r, _), edge in zip(atoms, atom_cum):
        if u < edge:
            return r
    return draws.exponential() * exp_mean


def simulate_ou(mech, c, x0, cfg, stream, eta_target=None, t_end=None):
    """
    Event-driven OU-type path from x0.

    Jump times of the compound-Poisson part are exact. Between records the
    Gaussian part moves by its exact transition (mean x e^{-ch} + (b/c)(1 - e^{-ch}),
    variance gamma (1 - e^{-2ch}) / (2c)); with gamma = 0 it is deterministic and
    both the zero crossing and the time change are exact. Near 0 the step is
    capped at LAMPERTI_STEP_FRACTION * R^2 / gamma and a zero crossing inside a
    step is located by bisection of the OU bridge.

    Args:
        mech (LevyMechanism): Driving mechanism
        c (float): Competition rate
        x0 (float): Initial value (> 0)
        cfg (RunConfig): dt bounds the record spacing when gamma > 0, t_max the OU time
        stream (RandomStream): Replica stream
        eta_target (float): Stop once the time change reaches this value
        t_end (float): OU time horizon (defaults to cfg.t_max)

    Returns:
        OUPath: Records up to T_0, eta_target or t_end (cap_hit in the last case)
    """
    if not x0 > 0:
        raise ValueError(f"OU paths start from x0 > 0, got {x0}")
    t_end = cfg.t_max if t_end is None else t_end
    draws = _Draws(stream.generator())
    b, gamma = mech.drift_b, mech.gamma
    level = b / c
    rho = mech.rho
    atoms = mech.atoms
    atom_cum = np.cumsum([rate for _, rate in atoms]) if atoms else []
    dt = cfg.dt
    h_floor = config.LAMPERTI_STEP_FRACTION * config.LAMPERTI_R_FLOOR**2 / gamma if gamma > 0 else 0.0

    t, x, eta = 0.0, float(x0), 0.0
    times, values, left, jumps = [0.0], [x], [x], []
    next_jump = draws.exponential() / rho if rho > 0 else np.inf
    t0, cap_hit = None, False

    while True:
        if t >= t_end:
            cap_hit = True
            break
        # with gamma = 0 the motion between jumps is exact, so records are only needed at jumps
        h = min(dt if gamma > 0 else np.inf, next_jump - t, t_end - t)
        jump_now = h == next_jump - t

        if gamma > 0:
            cap = max(config.LAMPERTI_STEP_FRACTION * x * x / gamma, h_floor)
            if cap < h:
                h, jump_now = cap, False
            mean, variance, decay = _ou_moments(x, h, level, c, gamma)
            y = mean + np.sqrt(variance) * draws.normal()
            if y <= 0.0:
                t0, eta = _bridge_crossing(draws, t, x, h, y, level, c, gamma, eta,
                                           times, values, left)
                break
            increment = 0.5 * h * (1.0 / x + 1.0 / y)
        else:
            crossing = _deterministic_crossing(x, level, c)
            if crossing <= h and eta_target is None:
                t0 = t + crossing
                times.append(t0)
                values.append(0.0)
                left.append(0.0)
                eta = np.inf
                break
            increment = deterministic_eta(x, min(h, crossing), level, c)
            if eta_target is None or eta + increment < eta_target:
                y = level + (x - level) * np.exp(-c * h)
            else:
                h = deterministic_eta_inverse(x, eta_target - eta, level, c)
                jump_now = False
                y = level + (x - level) * np.exp(-c * h)
                increment = eta_target - eta

        t += h
        eta += increment
        times.append(t)
        left.append(y)
        if jump_now:
            size = _sample_jump(draws, atoms, atom_cum, mech.exp_mean, rho)
            jumps.append((t, size))
            y += size
            next_jump = t + draws.exponential() / rho
        values.append(y)
        x = y
        if eta_target is not None and eta >= eta_target:
            break

    return OUPath(np.array(times), np.array(values), np.array(left), b, c, gamma, jumps,
                  t0, cap_hit)


def _bridge_crossing(draws, t, x, h, y, level, c, gamma, eta, times, values, left):
    """
    Locate the first zero of the OU bridge from (t, x) to (t + h, y <= 0).

    Positive midpoints to the left of the crossing are appended as records;
    returns (T_0, eta at T_0) and appends the crossing record.
    """
    t_left, x_left, t_right, y_right = t, x, t + h, y
    for _ in range(BRIDGE_LEVELS):
        half = 0.5 * (t_right - t_left)
        mean1, variance, decay = _ou_moments(x_left, half, level, c, gamma)
        bridge_mean = (mean1 + decay * (y_right + level * np.expm1(-c * half))) / (1.0 + decay**2)
        mid = bridge_mean + np.sqrt(variance / (1.0 + decay**2)) * draws.normal()
        if mid <= 0.0:
            t_right, y_right = t_left + half, mid
        else:
            eta += 0.5 * half * (1.0 / x_left + 1.0 / mid)
            t_left, x_left = t_left + half, mid
            times.append(t_left)
            values.append(mid)
            left.append(mid)

    t0 = 0.5 * (t_left + t_right)
    # R vanishes like a square root at the crossing
    eta += 2.0 * (t0 - t_left) / x_left
    times.append(t0)
    values.append(0.0)
    left.append(0.0)
    return t0, eta


def compute_eta(path):
    """
    Time change eta at every record.

    Exact increments when gamma = 0; otherwise trapezoid on 1/R with the final
    interval into T_0 integrated against the square-root profile (2h / R_k).

    Returns:
        np.ndarray: eta at path.times (the last entry is eta_inf if T_0 was reached)
    """
    h = np.diff(path.times)
    start, end = path.values[:-1], path.left[1:]
    if path.gamma == 0.0:
        increments = deterministic_eta(start, h, path.drift_level, path.c)
        increments = np.atleast_1d(increments)
        if path.t0 is not None and increments.size:
            increments[-1] = np.inf
    else:
        with np.errstate(divide='ignore'):
            increments = 0.5 * h * (1.0 / start + 1.0 / end)
        if path.t0 is not None and h.size:
            increments[-1] = 2.0 * h[-1] / start[-1]
    return np.concatenate(([0.0], np.cumsum(increments)))


def _r_between_records(path, index, elapsed):
    """R at times[index] + elapsed before the next record."""
    if path.gamma == 0.0:
        level = path.drift_level
        return level + (path.values[index] - level) * np.exp(-path.c * elapsed)
    span = path.times[np.minimum(index + 1, path.times.size - 1)] - path.times[index]
    weight = np.where(span > 0, elapsed / np.where(span > 0, span, 1.0), 0.0)
    nxt = path.left[np.minimum(index + 1, path.times.size - 1)]
    return path.values[index] + weight * (nxt - path.values[index])


def _read_z(path, eta, t):
    """R(C_t) for logistic times t within the reach of eta."""
    last = path.times.size - 1
    if path.gamma == 0.0:
        index = np.clip(np.searchsorted(eta, t, side='right') - 1, 0, last)
        span = path.times[np.minimum(index + 1, last)] - path.times[index]
        elapsed = deterministic_eta_inverse(path.values[index], t - eta[index],
                                            path.drift_level, path.c)
        elapsed = np.minimum(elapsed, span)
    else:
        finite = np.isfinite(eta)
        clock = np.interp(t, eta[finite], path.times[finite])
        index = np.clip(np.searchsorted(path.times, clock, side='right') - 1, 0, last)
        elapsed = clock - path.times[index]
    return np.maximum(_r_between_records(path, index, elapsed), 0.0)


def lamperti_forward(path, dt=None, t_end=None, verbose=False):
    """
    Logistic branching path Z_t = R(C_t) from an OU-type path.

    Args:
        path (OUPath): Path starting at R_0 > 0
        dt (float): Output grid spacing (defaults to config.DEFAULT_DT)
        t_end (float): Output horizon (defaults to the reach of eta)
        verbose (bool): Print a warning when the grid near T_0 is coarse

    Returns:
        Trajectory: Z on the grid; absorbed_at = eta_inf when T_0 was reached with
            finite eta_inf, cap_hit when the path does not cover t_end
    """
    if not path.values[0] > 0:
        raise ValueError(f"The time change needs R_0 > 0, got {path.values[0]}")
    dt = config.DEFAULT_DT if dt is None else dt
    eta = compute_eta(path)
    eta_inf = float(eta[-1]) if path.t0 is not None else None
    absorbed_at = eta_inf if (eta_inf is not None and np.isfinite(eta_inf)) else None
    if eta_inf is not None:
        # a crossing with divergent eta leaves Z positive at every time
        reach = eta_inf
    else:
        reach = float(eta[-1])
    if t_end is None:
        if not np.isfinite(reach):
            raise ValueError("t_end is required when the time change diverges at T_0")
        t_end = reach

    n_points = int(np.floor(t_end / dt + 1e-9)) + 1
    grid = dt * np.arange(n_points)
    if t_end - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t_end)
    cap_hit = absorbed_at is None and reach < t_end - 1e-9 * max(dt, t_end)
    if cap_hit:
        grid = grid[grid <= reach]

    inside = grid < reach if absorbed_at is not None else np.ones(grid.size, dtype=bool)
    states = np.zeros(grid.size)
    states[inside] = _read_z(path, eta, grid[inside])

    metadata = {'eta_inf': eta_inf, 'coarse_near_t0': False}
    if absorbed_at is not None and eta.size > 2 and path.gamma > 0:
        last_share = (eta[-1] - eta[-2]) / eta[-1]
        if last_share > config.LAMPERTI_COARSE_FRACTION:
            metadata['coarse_near_t0'] = True
            if verbose:
                print(f"⚠ Final OU interval carries {100 * last_share:.1f}% of eta; grid is coarse")
    return Trajectory(grid, states, absorbed_at, cap_hit, piecewise_constant=False,
                      metadata=metadata)


def lamperti_inverse(trajectory):
    """
    OU-type path from a logistic branching path: R(C_t) = Z_t with C_t = int_0^t Z.

    Args:
        trajectory (Trajectory): Grid-sampled Z

    Returns:
        tuple: (clock C on the grid, R values at those clock times), up to absorption
    """
    times, states = trajectory.times, np.asarray(trajectory.states, dtype=float)
    if trajectory.absorbed_at is not None:
        keep = times < trajectory.absorbed_at
        times, states = times[keep], states[keep]
    clock = integrate.cumulative_trapezoid(states, times, initial=0.0)
    return clock, states


def z_at(path, t):
    """
    Z at time(s) t read off an OU path (0 after absorption, nan beyond the reach of eta).

    Args:
        path (OUPath): Path starting at R_0 > 0
        t (float | np.ndarray): Times in the logistic clock

    Returns:
        float | np.ndarray: Z_t
    """
    t = np.asarray(t, dtype=float)
    eta = compute_eta(path)
    reach = eta[-1]
    values = _read_z(path, eta, t)
    if path.t0 is None:
        values = np.where(t > reach + 1e-12 * max(reach, 1.0), np.nan, values)
    elif np.isfinite(reach):
        values = np.where(t >= reach, 0.0, values)
    return values if values.ndim else float(values)


def simulate_lamperti(mech, c, x0, t_end, cfg, stream, verbose=False):
    """
    Logistic branching path on [0, t_end] through the Lamperti time change.

    Returns:
        Trajectory: Z on a grid of spacing cfg.dt
    """
    path = simulate_ou(mech, c, x0, cfg, stream, eta_target=t_end)
    trajectory = lamperti_forward(path, dt=cfg.dt, t_end=t_end, verbose=verbose)
    trajectory.metadata.update({'seed': stream.seed,
                                'replica': stream.path[-1] if stream.path else 0,
                                'n_jumps': len(path.jumps)})
    return trajectory


def lamperti_absorption_time(mech, c, x0, cfg, stream):
    """
    Absorption time eta_inf of one replica (OU time capped at cfg.t_max).

    Returns:
        tuple: (T_a, censored); censored replicas report the reach of eta
    """
    path = simulate_ou(mech, c, x0, cfg, stream)
    eta = compute_eta(path)
    if path.t0 is not None and np.isfinite(eta[-1]):
        return float(eta[-1]), False
    return float(eta[np.isfinite(eta)][-1]), True
