"""
Continuous Process Module
Feller-logistic diffusion dZ = bZ dt - cZ^2 dt + sqrt(gamma Z) dB by
Euler-Maruyama, replica batches through both the Euler and the Lamperti
routes, and the Monte Carlo checks of the generator and of the regimes.
"""

import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Mechanism.mechanisms import LevyMechanism, psi
from Numerics.streams import replica_stream
from Simulation.lamperti import lamperti_absorption_time, simulate_lamperti, simulate_ou, z_at
from Simulation.replicas import run_replicas
from Simulation.trajectory import ExtinctionBatch, Trajectory

# Integer labels that keep the substreams of different experiments apart
EULER_LABEL = 11
LAMPERTI_LABEL = 12
DYNKIN_LABEL = 13
PROFILE_LABEL = 14
ABSORPTION_LABEL = 15
RESOLVENT_LABEL = 16


@dataclass
class EulerBatch:
    """
    Outcome of a batch of Euler replicas.

    states[r] is Z at the horizon (None when sample_times were requested),
    absorption_times[r] is inf for replicas alive at the horizon, and
    sampled[r] is Z at the replica's own sample time.
    """
    states: np.ndarray
    absorption_times: np.ndarray
    sampled: np.ndarray = None
    horizon: float = None

    @property
    def absorbed_fraction(self):
        return float(np.mean(np.isfinite(self.absorption_times)))

    def as_extinction_batch(self, seed, x0):
        censored = ~np.isfinite(self.absorption_times)
        samples = np.where(censored, self.horizon, self.absorption_times)
        return ExtinctionBatch(samples, censored, seed, x0, self.horizon)


def _step_count(t_end, dt):
    if not t_end > 0:
        raise ValueError(f"Horizon must be positive, got {t_end}")
    return max(int(np.ceil(t_end / dt - 1e-9)), 1)


class _EulerBlock:
    """
    A block of Euler replicas advanced together.

    Each replica owns a generator and consumes one normal per step, refilled
    DRAW_CHUNK at a time at the same step index, so a replica's path does not
    depend on the block it runs in.
    """

    def __init__(self, b, c, gamma, x0, streams):
        self.b, self.c, self.gamma = b, c, gamma
        self.generators = [stream.generator() for stream in streams]
        self.z = np.full(len(streams), float(x0))
        self.absorbed_at = np.full(len(streams), np.inf)

    def _normals(self):
        return np.stack([g.standard_normal(config.DRAW_CHUNK) for g in self.generators], axis=1)

    def run(self, t_end, dt, sample_times=None, record=False, z_cap=np.inf):
        """
        Advance every replica to t_end (or its sample time).

        Returns:
            tuple: (states at t_end, absorption times, values at sample_times, path or None)
        """
        n_steps = _step_count(t_end, dt)
        h = t_end / n_steps
        sqrt_h = np.sqrt(h)
        b, c, gamma = self.b, self.c, self.gamma
        z = self.z
        alive = np.ones(z.size, dtype=bool)
        sampled = None
        if sample_times is not None:
            sample_times = np.asarray(sample_times, dtype=float)
            sampled = np.full(z.size, np.nan)
        path = [z.copy()] if record else None
        capped = False

        for k in range(n_steps):
            if k % config.DRAW_CHUNK == 0:
                normals = self._normals()
            t = k * h
            noise = np.sqrt(gamma * np.maximum(z, 0.0)) * sqrt_h * normals[k % config.DRAW_CHUNK]
            z_next = np.where(alive, z + (b * z - c * z * z) * h + noise, 0.0)

            crossed = alive & (z_next <= 0.0)
            if crossed.any():
                fraction = z[crossed] / (z[crossed] - z_next[crossed])
                self.absorbed_at[crossed] = t + h * fraction
                z_next[crossed] = 0.0
                alive &= ~crossed

            if sampled is not None:
                due = np.isnan(sampled) & (sample_times < t + h)
                if due.any():
                    weight = (sample_times[due] - t) / h
                    value = z[due] + weight * (z_next[due] - z[due])
                    gone = self.absorbed_at[due] <= sample_times[due]
                    sampled[due] = np.where(gone, 0.0, np.maximum(value, 0.0))
            z = z_next
            if record:
                path.append(z.copy())
            if np.any(z > z_cap):
                capped = True
                break
            if not alive.any() or (sampled is not None and not np.isnan(sampled).any()):
                break

        if sampled is not None:
            pending = np.isnan(sampled)
            sampled[pending] = z[pending]
        self.z = z
        return z, self.absorbed_at, sampled, (np.array(path), h, capped) if record else None


def simulate_feller_logistic(b, c, gamma, x0, cfg, stream, t_end=None):
    """
    Euler-Maruyama path of the Feller-logistic diffusion.

    The diffusion coefficient is sqrt(gamma * max(Z, 0)). A step that lands
    at or below 0 is absorbed at the linearly interpolated crossing time and
    the path is 0 from then on.

    Args:
        b (float): Linear growth rate
        c (float): Competition rate (> 0)
        gamma (float): Diffusion coefficient (> 0)
        x0 (float): Initial state (> 0)
        cfg (RunConfig): dt, t_max (default horizon) and z_cap
        stream (RandomStream): Replica stream
        t_end (float): Horizon (defaults to cfg.t_max)

    Returns:
        Trajectory: Grid-sampled path (truncated after absorption)
    """
    _check_feller(c, gamma, x0)
    t_end = cfg.t_max if t_end is None else t_end
    block = _EulerBlock(b, c, gamma, x0, [stream])
    _, absorbed, _, (path, h, capped) = block.run(t_end, cfg.dt, record=True, z_cap=cfg.z_cap)
    states = path[:, 0]
    times = h * np.arange(states.size)
    absorbed_at = float(absorbed[0]) if np.isfinite(absorbed[0]) else None
    metadata = {'seed': stream.seed, 'replica': stream.path[-1] if stream.path else 0,
                'dt': h, 'route': 'euler'}
    return Trajectory(times, states, absorbed_at, capped, piecewise_constant=False,
                      metadata=metadata)


def _check_feller(c, gamma, x0):
    if not c > 0:
        raise ValueError(f"Competition rate c must be positive, got {c}")
    if not gamma > 0:
        raise ValueError(f"The Euler route needs gamma > 0, got {gamma}")
    if not x0 > 0:
        raise ValueError(f"Initial state must be positive, got {x0}")


def _euler_block_job(job):
    b, c, gamma, x0, seed, labels, first, count, t_end, dt, sample_times = job
    streams = [replica_stream(seed, r, *labels) for r in range(first, first + count)]
    block = _EulerBlock(b, c, gamma, x0, streams)
    z, absorbed, sampled, _ = block.run(t_end, dt, sample_times=sample_times)
    return z, absorbed, sampled


def feller_logistic_batch(b, c, gamma, x0, t_end, cfg, labels=(), sample_times=None,
                          verbose=False):
    """
    cfg.replicas Euler replicas, vectorized over blocks of EULER_BLOCK.

    Replica r uses the stream (seed, EULER_LABEL, labels, r) and follows the
    same path as simulate_feller_logistic on that stream.

    Args:
        b, c, gamma (float): Diffusion parameters
        x0 (float): Initial state
        t_end (float): Horizon
        cfg (RunConfig): replicas, seed, dt and workers
        labels (tuple): Extra stream labels
        sample_times (np.ndarray): Optional per-replica times at which Z is read;
            a block stops once every replica is absorbed or sampled
        verbose (bool): Print progress

    Returns:
        EulerBatch: Horizon states, absorption times and sampled values
    """
    _check_feller(c, gamma, x0)
    if sample_times is not None:
        sample_times = np.asarray(sample_times, dtype=float)
        if sample_times.shape != (cfg.replicas,):
            raise ValueError(
                f"sample_times needs one entry per replica ({cfg.replicas}), got {sample_times.shape}"
            )
    labels = (EULER_LABEL,) + tuple(labels)
    jobs = []
    for first in range(0, cfg.replicas, config.EULER_BLOCK):
        count = min(config.EULER_BLOCK, cfg.replicas - first)
        times = None if sample_times is None else sample_times[first:first + count]
        jobs.append((b, c, gamma, x0, cfg.seed, labels, first, count, t_end, cfg.dt, times))

    start = time.time()
    if verbose:
        print(f"Euler route: {cfg.replicas} replicas to t = {t_end:g} (dt = {cfg.dt:g})...")
    if cfg.workers <= 1 or len(jobs) < 2:
        results = [_euler_block_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_euler_block_job, jobs))
    if verbose:
        print(f"  done in {time.time() - start:.1f}s")

    states = np.concatenate([r[0] for r in results])
    absorbed = np.concatenate([r[1] for r in results])
    sampled = None if sample_times is None else np.concatenate([r[2] for r in results])
    return EulerBatch(None if sample_times is not None else states, absorbed, sampled, t_end)


def _lamperti_marginal_kernel(stream, mech, c, x0, times, cfg):
    path = simulate_ou(mech, c, x0, cfg, stream, eta_target=float(np.max(times)))
    return z_at(path, times)


def lamperti_marginals(mech, c, x0, times, cfg, labels=(), verbose=False):
    """
    Samples of Z at the given times through the Lamperti route.

    Returns:
        np.ndarray: (replicas, len(times)) array; nan where the OU time cap cut a path short
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if verbose:
        print(f"Lamperti route: {cfg.replicas} replicas at {times.size} time(s)...")
    rows = run_replicas(_lamperti_marginal_kernel, cfg.replicas, cfg.seed,
                        labels=(LAMPERTI_LABEL,) + tuple(labels),
                        args=(mech, c, x0, times, cfg), workers=cfg.workers, verbose=verbose)
    return np.vstack(rows)


def _lamperti_absorption_kernel(stream, mech, c, x0, cfg):
    return lamperti_absorption_time(mech, c, x0, cfg, stream)


def lamperti_extinction_samples(mech, c, x0, cfg, labels=(), verbose=False):
    """
    Absorption times eta_inf through the Lamperti route.

    cfg.t_max caps the OU clock; paths that have not reached 0 by then are
    censored at the reach of their time change.

    Returns:
        ExtinctionBatch: Samples with censoring flags
    """
    results = run_replicas(_lamperti_absorption_kernel, cfg.replicas, cfg.seed,
                           labels=(ABSORPTION_LABEL,) + tuple(labels),
                           args=(mech, c, x0, cfg), workers=cfg.workers, verbose=verbose)
    samples = np.array([r[0] for r in results])
    censored = np.array([r[1] for r in results])
    batch = ExtinctionBatch(samples, censored, cfg.seed, x0, cfg.t_max)
    if verbose:
        marker = "⚠" if batch.censored_fraction > config.CENSORING_MAX else "✓"
        print(f"{marker} Censored: {int(censored.sum())}/{batch.n_replicas}")
    return batch


@dataclass
class DynkinResult:
    residual: float
    stderr: float
    n_replicas: int

    @property
    def sigmas(self):
        if self.stderr == 0.0:
            return 0.0 if self.residual == 0.0 else np.inf
        return self.residual / self.stderr


def _dynkin_kernel(stream, mech, c, x0, lam, t, psi_lam, cfg):
    trajectory = simulate_lamperti(mech, c, x0, t, cfg, stream)
    z = trajectory.state_at(trajectory.times)
    integrand = (psi_lam + c * lam * z) * z * np.exp(-lam * z)
    compensator = integrate.trapezoid(integrand, trajectory.times)
    return np.exp(-lam * trajectory.state_at(t)) - np.exp(-lam * x0) - compensator


def dynkin_exponential_check(mech, c, x0, lam, t, cfg, labels=(), verbose=False):
    """
    Monte Carlo check of the generator on f(z) = exp(-lambda z).

    Per replica D = e^{-lam Z_t} - e^{-lam x} - int_0^t (psi(lam) + c lam Z_u) Z_u e^{-lam Z_u} du
    along a Lamperti-route path; E[D] = 0.

    Args:
        mech (LevyMechanism): Mechanism
        c (float): Competition rate
        x0 (float): Initial state
        lam (float): Exponent (>= 0)
        t (float): Horizon (>= 0, small)
        cfg (RunConfig): replicas, seed, dt, t_max and workers

    Returns:
        DynkinResult: |mean D| with its standard error
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0 or lam == 0:
        return DynkinResult(0.0, 0.0, 0)
    values = np.array(run_replicas(_dynkin_kernel, cfg.replicas, cfg.seed,
                                   labels=(DYNKIN_LABEL,) + tuple(labels),
                                   args=(mech, c, x0, lam, t, psi(mech, lam), cfg),
                                   workers=cfg.workers, verbose=verbose))
    return DynkinResult(abs(float(np.mean(values))), config.standard_error(values), values.size)


def null_recurrence_profile(mech, c, x0, eps, times, cfg, labels=(), verbose=False):
    """
    Empirical P(Z_t > eps) over a time grid (Lamperti route).

    Args:
        mech (LevyMechanism): Mechanism (typically delta = 0, rho < c)
        c (float): Competition rate
        x0 (float): Initial state
        eps (float): Level
        times (array-like): Increasing times

    Returns:
        tuple: (probabilities, standard errors) per time
    """
    if not isinstance(mech, LevyMechanism):
        raise TypeError("null_recurrence_profile needs a LevyMechanism")
    samples = lamperti_marginals(mech, c, x0, times, cfg, labels=(PROFILE_LABEL,) + tuple(labels),
                                 verbose=verbose)
    above = (np.nan_to_num(samples, nan=np.inf) > eps).astype(float)
    probabilities = above.mean(axis=0)
    errors = np.sqrt(probabilities * (1.0 - probabilities) / above.shape[0])
    return probabilities, errors


def absorbed_by(trajectory_or_batch, t):
    """Fraction absorbed by time t for an EulerBatch or ExtinctionBatch."""
    if isinstance(trajectory_or_batch, EulerBatch):
        return float(np.mean(trajectory_or_batch.absorption_times <= t))
    batch = trajectory_or_batch
    return float(np.mean(~batch.censored & (batch.samples <= t)))


def resolvent_monte_carlo(b, c, gamma, x0, q, lam, cfg, labels=(), verbose=False):
    """
    Empirical E_x[exp(-lambda Z_tau)] with tau ~ Exp(q) independent of Z.

    This is the Monte Carlo counterpart of q G_{q,x}(lambda). Replica r draws
    its tau from the stream (seed, RESOLVENT_LABEL, labels, r) and reads its
    Euler path at that time (0 once absorbed).

    Args:
        b, c, gamma (float): Feller-logistic parameters
        x0 (float): Initial state
        q (float): Rate of the exponential time (> 0)
        lam (float): Exponent (>= 0)
        cfg (RunConfig): replicas, seed, dt and workers

    Returns:
        tuple: (estimate, standard error)
    """
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    labels = (RESOLVENT_LABEL,) + tuple(labels)
    taus = np.array([replica_stream(cfg.seed, r, *labels).generator().exponential(1.0 / q)
                     for r in range(cfg.replicas)])
    batch = feller_logistic_batch(b, c, gamma, x0, max(float(taus.max()), cfg.dt), cfg,
                                  labels=labels, sample_times=taus, verbose=verbose)
    values = np.exp(-lam * batch.sampled)
    return float(np.mean(values)), config.standard_error(values)
