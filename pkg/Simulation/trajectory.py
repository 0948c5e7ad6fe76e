"""
Trajectory Module
Sample paths and batches of absorption times shared by every simulator.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


@dataclass
class Trajectory:
    """
    Ordered (time, state) records of one sample path.

    Discrete paths are piecewise constant between records (jump times);
    continuous paths are sampled on a grid and interpolated linearly.
    After absorbed_at the state is 0 and stays there.
    """
    times: np.ndarray
    states: np.ndarray
    absorbed_at: float = None
    cap_hit: bool = False
    piecewise_constant: bool = True
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states)
        if self.times.shape != self.states.shape:
            raise ValueError(
                f"Shape mismatch: times={self.times.shape}, states={self.states.shape}"
            )
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")

    def __len__(self):
        return int(self.times.size)

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_time(self):
        return float(self.times[-1])

    def state_at(self, t):
        """
        State at time(s) t.

        Args:
            t (float | np.ndarray): Query times within [times[0], final_time]
                (or any t >= absorbed_at)

        Returns:
            State value(s)
        """
        t = np.asarray(t, dtype=float)
        if self.piecewise_constant:
            index = np.searchsorted(self.times, t, side='right') - 1
            values = self.states[np.clip(index, 0, len(self) - 1)]
        else:
            values = np.interp(t, self.times, self.states.astype(float))
        if self.absorbed_at is not None:
            values = np.where(t >= self.absorbed_at, 0, values)
        return values if values.ndim else values.item()

    def records(self):
        return list(zip(self.times.tolist(), self.states.tolist()))


@dataclass
class ExtinctionBatch:
    """
    Absorption times of independent replicas.

    Censored replicas (still alive at t_max) carry t_max as their sample.
    """
    samples: np.ndarray
    censored: np.ndarray
    seed: int
    x0: float
    t_max: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.censored = np.asarray(self.censored, dtype=bool)

    @property
    def n_replicas(self):
        return int(self.samples.size)

    @property
    def censored_fraction(self):
        return float(np.mean(self.censored)) if self.samples.size else 0.0

    def mean(self):
        return float(np.mean(self.samples))

    def mean_stderr(self):
        return config.standard_error(self.samples)

    def laplace(self, q):
        """Empirical E[exp(-q T_a)] and its standard error (censored samples count as 0)."""
        values = np.where(self.censored, 0.0, np.exp(-q * self.samples))
        return float(np.mean(values)), config.standard_error(values)
